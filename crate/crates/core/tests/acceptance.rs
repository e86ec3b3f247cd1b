//! Acceptance checks, one line per criterion. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use rhvi_fdd::cli::cli_dispatch_to;
use rhvi_fdd::color::{collapse_radius, hvi_forward, hvi_inverse, max_rgb, noise_bias, RgbImage};
use rhvi_fdd::container::{decode_weights, encode_weights, load_weights, save_weights};
use rhvi_fdd::degrade::{degrade, DegradeParams};
use rhvi_fdd::error::Error;
use rhvi_fdd::fdd::{
    acgf_fuse, acgf_gates, ansu_forward, band_masks, dct2, dct2_naive, drg_forward, fdd_apply,
    fdd_init_weights, fdd_zero_weights, gcm_forward, idct2, BandSet, FddConfig,
};
use rhvi_fdd::io::{decode_png, encode_png};
use rhvi_fdd::loss::{fd_gradient_check, loss_total};
use rhvi_fdd::pipeline::{bands_visualize, enhance, enhance_detailed, init_weights, EnhanceConfig};
use rhvi_fdd::tensor::Tensor;
use rhvi_fdd::weights::{Param, WeightStore};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.gen_range(lo..hi))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_naive, mut worst_parseval, mut worst_inverse) = (0f32, 0f64, 0f32);
    for (h, w) in [(8, 8), (16, 12), (17, 5)] {
        for _ in 0..20 {
            let x = random_tensor(&mut rng, 3, h, w, -1.0, 1.0);
            let fast = dct2(&x);
            worst_naive = worst_naive.max(fast.max_abs_diff(&dct2_naive(&x)));
            worst_parseval = worst_parseval.max((fast.sum_sq() - x.sum_sq()).abs() / x.sum_sq());
            worst_inverse = worst_inverse.max(idct2(&fast).max_abs_diff(&x));
        }
    }
    let elapsed = start.elapsed();
    ensure(worst_naive <= 1e-5, || {
        format!("fast vs naive {worst_naive:e} > 1e-5")
    })?;
    ensure(worst_parseval <= 1e-6, || {
        format!("Parseval {worst_parseval:e} > 1e-6")
    })?;
    ensure(worst_inverse <= 1e-6, || {
        format!("inverse {worst_inverse:e} > 1e-6")
    })?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "naive {worst_naive:.1e}, Parseval {worst_parseval:.1e}, inverse {worst_inverse:.1e}, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    for h in 4..=64 {
        for w in 4..=64 {
            let m = band_masks(h, w, 0.25, 0.5).map_err(|e| e.to_string())?;
            for i in 0..h * w {
                let hits = m.low[i] as u8 + m.mid[i] as u8 + m.high[i] as u8;
                ensure(hits == 1, || {
                    format!("{h}x{w} position {i} is covered {hits} times")
                })?;
            }
        }
    }
    let m = band_masks(8, 8, 0.25, 0.5).map_err(|e| e.to_string())?;
    let counts = (m.count_low(), m.count_mid(), m.count_high());
    ensure(counts == (4, 12, 48), || format!("8x8 counts {counts:?}"))?;
    Ok("3721 shapes partitioned, 8x8 counts 4/12/48".into())
}

/// `P(clamp(max_c(u_c + n_c), 0, 1) <= y)` integrated: `E = int_0^1 (1 - F(y)^3) dy`, where
/// `F` is the CDF of uniform(0, 0.5) plus N(0, sigma^2).
fn expected_noisy_max(sigma: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    // antiderivative of Phi: t * Phi(t) + phi(t)
    let big_g = |t: f64| t * std.cdf(t) + std.pdf(t);
    let cdf = |y: f64| (sigma / 0.5) * (big_g(y / sigma) - big_g((y - 0.5) / sigma));
    let n = 20_000;
    let step = 1.0 / n as f64;
    let f = |y: f64| 1.0 - cdf(y).powi(3);
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        sum += f(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * step / 3.0
}

fn criterion_3() -> Outcome {
    let (h, w) = (400, 250);
    let sigma = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clean = RgbImage::from_fn(h, w, |_, _, _| rng.gen_range(0.0..0.5));
    let noise = NormalDist::new(0.0f32, sigma as f32).unwrap();
    let noisy_raw = Tensor::from_fn(3, h, w, |c, y, x| {
        clean.tensor().get(c, y, x) + noise.sample(&mut rng)
    });
    let noisy = RgbImage::new(noisy_raw).map_err(|e| e.to_string())?;

    let report = noise_bias(&clean, &noisy).map_err(|e| e.to_string())?;
    let n = (h * w) as f64;

    // brute-force per-pixel recomputation, independent of the library's Max-RGB
    let mut deltas = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let c = clean.pixel(y, x).map(f64::from);
            let d = noisy.pixel(y, x).map(f64::from);
            deltas.push(d[0].max(d[1]).max(d[2]) - c[0].max(c[1]).max(c[2]));
        }
    }
    let mean = deltas.iter().sum::<f64>() / n;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();

    let analytic = expected_noisy_max(sigma) - 0.375;
    ensure(report.mean_bias > 0.0, || {
        format!("mean bias {} is not positive", report.mean_bias)
    })?;
    ensure((report.mean_bias - mean).abs() <= 3.0 * se, || {
        format!(
            "library {} vs brute force {mean} (se {se:e})",
            report.mean_bias
        )
    })?;
    ensure((mean - analytic).abs() <= 3.0 * se, || {
        format!("sample mean {mean} vs analytic {analytic} (se {se:e})")
    })?;
    Ok(format!(
        "{} px, mean {:.5}, brute force {mean:.5}, analytic {analytic:.5}, se {se:.1e}",
        h * w,
        report.mean_bias
    ))
}

fn random_bright_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> RgbImage {
    let mut t = Tensor::zeros(3, h, w);
    for y in 0..h {
        for x in 0..w {
            let px = loop {
                let p: [f32; 3] = [rng.gen(), rng.gen(), rng.gen()];
                if p[0].max(p[1]).max(p[2]) >= 0.05 {
                    break p;
                }
            };
            for (c, v) in px.iter().enumerate() {
                t.set(c, y, x, *v);
            }
        }
    }
    RgbImage::new(t).expect("three channels")
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0f32;
    for _ in 0..100 {
        let img = random_bright_image(&mut rng, 16, 16);
        for k in [0.5f32, 1.0, 2.0] {
            let hvi = hvi_forward(&img, k).map_err(|e| e.to_string())?;
            for idx in 0..hvi.i.plane_len() {
                let (hh, vv) = (f64::from(hvi.h.data()[idx]), f64::from(hvi.v.data()[idx]));
                let bound = collapse_radius(f64::from(hvi.i.data()[idx]), f64::from(k));
                ensure((hh * hh + vv * vv).sqrt() <= bound + 1e-6, || {
                    format!("chroma norm exceeds radius {bound} at k={k}")
                })?;
            }
            let back = hvi_inverse(&hvi).map_err(|e| e.to_string())?;
            worst = worst.max(back.tensor().max_abs_diff(img.tensor()));
        }
    }
    ensure(worst <= 1e-4, || {
        format!("round trip error {worst:e} > 1e-4")
    })?;
    Ok(format!(
        "300 round trips, worst {worst:.1e}, chroma bound holds"
    ))
}

fn criterion_5() -> Outcome {
    let cfg = FddConfig::default();
    let zero = fdd_zero_weights(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_tensor(&mut rng, cfg.channels, 16, 16, -2.0, 2.0);
    ensure(
        gcm_forward(&x, &zero, &cfg)
            .map_err(|e| e.to_string())?
            .bitwise_eq(&x),
        || "gcm".into(),
    )?;
    ensure(
        drg_forward(&x, &zero, &cfg)
            .map_err(|e| e.to_string())?
            .bitwise_eq(&x),
        || "drg".into(),
    )?;
    ensure(
        ansu_forward(&x, &zero, &cfg)
            .map_err(|e| e.to_string())?
            .bitwise_eq(&x),
        || "ansu".into(),
    )?;

    let bands = BandSet {
        low: random_tensor(&mut rng, cfg.channels, 8, 8, -3.0, 3.0),
        mid: random_tensor(&mut rng, cfg.channels, 8, 8, -3.0, 3.0),
        high: random_tensor(&mut rng, cfg.channels, 8, 8, -3.0, 3.0),
    };
    let gates = acgf_gates(&bands, &zero, &cfg).map_err(|e| e.to_string())?;
    ensure(gates.iter().all(|&g| g == 1.0), || {
        "gates are not all 1".into()
    })?;
    let fused = acgf_fuse(&bands, &zero, &cfg).map_err(|e| e.to_string())?;
    let plain = bands.low.add(&bands.mid).unwrap().add(&bands.high).unwrap();
    ensure(fused.bitwise_eq(&plain), || {
        "fusion is not a plain sum".into()
    })?;

    let y = fdd_apply(&x, &zero, &cfg).map_err(|e| e.to_string())?;
    let err = y.max_abs_diff(&x.scale(2.0));
    ensure(err <= 1e-5, || format!("neutral fdd error {err:e} > 1e-5"))?;
    Ok(format!(
        "experts exact, unit gates, neutral fdd error {err:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let cfg = FddConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for draw in 0..1000u64 {
        let mut w = fdd_init_weights(draw, &cfg);
        // push some draws deep into saturation
        let gain = [1.0f32, 10.0, 1e3, 1e6][(draw % 4) as usize];
        for name in ["acgf.fc1.weight", "acgf.fc2.weight", "acgf.fc2.bias"] {
            w.get_mut(name)
                .unwrap()
                .data_mut()
                .iter_mut()
                .for_each(|v| *v *= gain);
        }
        let scale = rng.gen_range(0.1f32..50.0);
        let bands = BandSet {
            low: random_tensor(&mut rng, cfg.channels, 4, 4, -scale, scale),
            mid: random_tensor(&mut rng, cfg.channels, 4, 4, -scale, scale),
            high: random_tensor(&mut rng, cfg.channels, 4, 4, -scale, scale),
        };
        for g in acgf_gates(&bands, &w, &cfg).map_err(|e| e.to_string())? {
            ensure(g > 0.0 && g < 2.0, || {
                format!("draw {draw}: gate {g} outside (0, 2)")
            })?;
            lo = lo.min(g);
            hi = hi.max(g);
        }
    }
    Ok(format!("1000 draws, gates in [{lo:e}, {hi}]"))
}

fn criterion_7() -> Outcome {
    let cfg = EnhanceConfig::default();
    let w = init_weights(7, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let img = RgbImage::from_fn(256, 256, |_, _, _| rng.gen_range(0.0..0.3));
    let start = Instant::now();
    let a = enhance(&img, &w, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let b = enhance(&img, &w, &cfg).map_err(|e| e.to_string())?;
    ensure(a.tensor().shape() == (3, 256, 256), || {
        format!("shape {:?}", a.tensor().shape())
    })?;
    ensure(a.tensor().is_finite(), || "non-finite output".into())?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    ensure(a.tensor().bitwise_eq(b.tensor()), || {
        "repeat differs".into()
    })?;
    Ok(format!("256x256 in {elapsed:.2?}, bitwise repeatable"))
}

fn criterion_8() -> Outcome {
    let cfg = EnhanceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gt = RgbImage::from_fn(32, 32, |_, _, _| rng.gen_range(0.0..1.0));
    let zero = loss_total(&gt, &gt, &max_rgb(&gt), &cfg, cfg.k).map_err(|e| e.to_string())?;
    let terms = [
        zero.l1,
        zero.edge,
        zero.ssim_loss,
        zero.hvi_l1,
        zero.hvi_edge,
        zero.hvi_ssim,
        zero.aux,
        zero.total,
    ];
    ensure(terms.iter().all(|&t| t == 0.0), || {
        format!("non-zero terms at pred = gt: {zero:?}")
    })?;

    // smooth scene so the loss surface is not dominated by per-pixel kinks
    let clean = RgbImage::from_fn(32, 32, |c, y, x| {
        0.5 + 0.3 * ((x as f32 * 0.2 + c as f32).sin() * (y as f32 * 0.15).cos())
    });
    let low = degrade(
        &clean,
        &DegradeParams {
            seed: 8,
            ..DegradeParams::default()
        },
    )
    .map_err(|e| e.to_string())?;
    // many seeds park the refinement output on its lower clamp, where the loss is flat in
    // every IRM weight; seed 0 keeps it in the interior
    let base = init_weights(0, &cfg);
    let out = enhance_detailed(&low, &base, &cfg).map_err(|e| e.to_string())?;
    let clamped = out
        .refined_illumination
        .data()
        .iter()
        .filter(|&&v| v <= cfg.irm.output_clamp.0)
        .count();
    ensure(clamped == 0, || {
        format!("{clamped} refined pixels sit on the clamp")
    })?;
    let parts = loss_total(&out.image, &clean, &out.refined_illumination, &cfg, cfg.k)
        .map_err(|e| e.to_string())?;
    let recomputed = parts.recompute(&cfg.loss);
    ensure((parts.total - recomputed).abs() <= 1e-6, || {
        format!("total {} vs recomputed {recomputed}", parts.total)
    })?;

    let name = "irm.exit.weight";
    let start = f64::from(base.get(name).unwrap().data()[0]);
    let f = |theta: &[f64]| {
        let mut w = base.clone();
        w.get_mut(name)?.data_mut()[0] = theta[0] as f32;
        let out = enhance_detailed(&low, &w, &cfg)?;
        Ok(loss_total(&out.image, &clean, &out.refined_illumination, &cfg, cfg.k)?.total)
    };
    let (d1, d2) = fd_gradient_check(f, &[start], &[1.0], 1e-2).map_err(|e| e.to_string())?;
    ensure(d2.abs() > 1e-4, || {
        format!("derivative {d2} is too small to compare")
    })?;
    let rel = (d1 - d2).abs() / (d2.abs() + 1e-12);
    ensure(rel <= 0.05, || {
        format!("d1 {d1} vs d2 {d2}: relative gap {rel:.3}")
    })?;
    Ok(format!(
        "zero at optimum, total recomputes, d1 {d1:.5} d2 {d2:.5} gap {:.2}%",
        rel * 100.0
    ))
}

fn criterion_9() -> Outcome {
    let cfg = EnhanceConfig::default();
    let mut worst = 0f32;
    for seed in 0..5u64 {
        let w = init_weights(900 + seed, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = RgbImage::from_fn(64, 64, |_, _, _| rng.gen_range(0.0..1.0));
        let r = bands_visualize(&img, &w, &cfg).map_err(|e| e.to_string())?;
        let sum = r.low.add(&r.mid).unwrap().add(&r.high).unwrap();
        worst = worst.max(sum.max_abs_diff(&r.full));
    }
    ensure(worst <= 1e-5, || {
        format!("band sum vs full reconstruction {worst:e} > 1e-5")
    })?;
    Ok(format!("5 images, worst gap {worst:.1e}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut store = init_weights(10, &EnhanceConfig::default());
    let odd: Vec<f32> = (0..24).map(|_| rng.gen_range(-1e30f32..1e30)).collect();
    store.insert("z.odd", Param::new(vec![2, 3, 4], odd).unwrap());
    store.insert(
        "z.tiny",
        Param::new(vec![1], vec![f32::MIN_POSITIVE / 4.0]).unwrap(),
    );
    let bytes = encode_weights(&store).map_err(|e| e.to_string())?;
    let back: WeightStore = decode_weights(&bytes).map_err(|e| e.to_string())?;
    let bitwise = store.iter().zip(back.iter()).all(|((na, pa), (nb, pb))| {
        na == nb
            && pa.dims() == pb.dims()
            && pa
                .data()
                .iter()
                .zip(pb.data())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    });
    ensure(bitwise && store.len() == back.len(), || {
        "container round trip is not bitwise".into()
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("w.rfdd");
    save_weights(&store, &path).map_err(|e| e.to_string())?;
    ensure(
        load_weights(&path).map_err(|e| e.to_string())? == store,
        || "disk round trip differs".into(),
    )?;

    let pixels = RgbImage::from_fn(7, 9, |_, _, _| f32::from(rng.gen::<u8>()) / 255.0);
    let png = encode_png(&pixels).map_err(|e| e.to_string())?;
    let decoded = decode_png(&png).map_err(|e| e.to_string())?;
    ensure(decoded.tensor().bitwise_eq(pixels.tensor()), || {
        "png round trip is lossy".into()
    })?;
    ensure(
        encode_png(&decoded).map_err(|e| e.to_string())? == png,
        || "png re-encode differs".into(),
    )?;

    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"XFDD");
    match decode_weights(&bad) {
        Err(Error::Format { offset: 0, .. }) => {}
        other => return Err(format!("bad magic gave {other:?}")),
    }
    let bad_path = dir.path().join("bad.rfdd");
    std::fs::write(&bad_path, &bad).map_err(|e| e.to_string())?;
    let img_path = dir.path().join("in.png");
    std::fs::write(&img_path, &png).map_err(|e| e.to_string())?;
    let out_path = dir.path().join("out.png");
    let argv = [
        "rhvi-fdd",
        "enhance",
        img_path.to_str().unwrap(),
        out_path.to_str().unwrap(),
        "--weights",
        bad_path.to_str().unwrap(),
    ];
    let code = cli_dispatch_to(argv, &mut std::io::sink());
    ensure(code == 1, || {
        format!("bad magic exit code {code}, expected 1")
    })?;
    let code = cli_dispatch_to(["rhvi-fdd", "selftest"], &mut std::io::sink());
    ensure(code == 0, || format!("selftest exit code {code}"))?;
    Ok("container and png bitwise, bad magic -> exit 1, selftest -> exit 0".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("DCT oracle suite", criterion_1),
        ("mask partition", criterion_2),
        ("noise-bias Monte Carlo", criterion_3),
        ("transform round trip", criterion_4),
        ("expert neutrality", criterion_5),
        ("gate range", criterion_6),
        ("end-to-end soundness", criterion_7),
        ("loss consistency", criterion_8),
        ("band-visualization linearity", criterion_9),
        ("formats", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
