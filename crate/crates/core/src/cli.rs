//! Command-line surface. Exit codes: 0 success, 1 contract or format error, 2 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::{hvi_forward, hvi_inverse, noise_bias, HviImage, RgbImage};
use crate::config::load_config;
use crate::container::{decode_weights, encode_weights, load_weights, save_weights};
use crate::degrade::{degrade, DegradeParams};
use crate::error::{Error, Result};
use crate::fdd::{
    ansu_forward, band_masks, dct2, dct2_naive, drg_forward, fdd_apply, fdd_zero_weights,
    gcm_forward, idct2, FddConfig,
};
use crate::io::{decode_png, encode_png, load_gray, load_image, save_gray, save_image};
use crate::metrics::{edge_loss, psnr, ssim};
use crate::pipeline::{bands_visualize, enhance, enhance_any_size, init_weights, EnhanceConfig};
use crate::tensor::Tensor;

#[derive(Parser, Debug)]
#[command(
    name = "rhvi-fdd",
    version,
    about = "Low-light enhancement with HVI decoupling and DCT band experts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split an RGB image into H, V and I planes (h.png, v.png, i.png).
    Transform {
        input: PathBuf,
        outdir: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        k: f32,
    },
    /// Rebuild an RGB image from H, V and I planes written by `transform`.
    Inverse {
        h: PathBuf,
        v: PathBuf,
        i: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        k: f32,
    },
    /// Enhance a low-light image.
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<f32>,
    },
    /// Export the low, mid and high band responses of the chrominance bottleneck.
    Bands {
        input: PathBuf,
        outdir: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report the Max-RGB bias of a noisy image against its clean counterpart.
    NoiseBias { clean: PathBuf, noisy: PathBuf },
    /// Synthesize a dark, noisy version of an image.
    Degrade {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 2.2)]
        gamma: f64,
        #[arg(long, default_value_t = 0.2)]
        dim: f64,
        #[arg(long, default_value_t = 0.02)]
        sigma_read: f64,
        #[arg(long, default_value_t = 0.05)]
        sigma_shot: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print PSNR, SSIM and edge distance between two images.
    Metrics { a: PathBuf, b: PathBuf },
    /// Write a seeded weight container.
    InitWeights {
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the parameter count.
        #[arg(long)]
        summary: bool,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn config_with(path: Option<&Path>, k: Option<f32>) -> Result<EnhanceConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => EnhanceConfig::default(),
    };
    if let Some(k) = k {
        cfg.k = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn run(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Transform { input, outdir, k } => {
            let hvi = hvi_forward(&load_image(&input)?, k)?;
            create_dir(&outdir)?;
            let unit = |t: &Tensor| t.map(|v| (v + 1.0) / 2.0);
            save_gray(&unit(&hvi.h), outdir.join("h.png"))?;
            save_gray(&unit(&hvi.v), outdir.join("v.png"))?;
            save_gray(&hvi.i, outdir.join("i.png"))?;
        }
        Command::Inverse { h, v, i, output, k } => {
            let signed = |t: Tensor| t.map(|v| 2.0 * v - 1.0);
            let hvi = HviImage {
                h: signed(load_gray(&h)?),
                v: signed(load_gray(&v)?),
                i: load_gray(&i)?,
                k,
            };
            save_image(&hvi_inverse(&hvi)?, &output)?;
        }
        Command::Enhance {
            input,
            output,
            weights,
            config,
            k,
        } => {
            let cfg = config_with(config.as_deref(), k)?;
            let store = load_weights(&weights)?;
            let img = load_image(&input)?;
            save_image(&enhance_any_size(&img, &store, &cfg)?, &output)?;
        }
        Command::Bands {
            input,
            outdir,
            weights,
            config,
        } => {
            let cfg = config_with(config.as_deref(), None)?;
            let store = load_weights(&weights)?;
            let img = load_image(&input)?;
            let m = cfg.size_multiple();
            if img.height() % m != 0 || img.width() % m != 0 {
                return Err(Error::contract(format!(
                    "bands needs dims divisible by {m}, got {}x{}",
                    img.height(),
                    img.width()
                )));
            }
            let r = bands_visualize(&img, &store, &cfg)?;
            create_dir(&outdir)?;
            for (name, plane) in ["low", "mid", "high"].iter().zip(r.normalized()) {
                save_gray(&plane, outdir.join(format!("{name}.png")))?;
            }
        }
        Command::NoiseBias { clean, noisy } => {
            let r = noise_bias(&load_image(&clean)?, &load_image(&noisy)?)?;
            emit(out, &format!("mean_bias={:.6}", r.mean_bias))?;
            emit(
                out,
                &format!("positive_fraction={:.6}", r.positive_fraction),
            )?;
            emit(out, &format!("max_bias={:.6}", r.max_bias))?;
        }
        Command::Degrade {
            input,
            output,
            gamma,
            dim,
            sigma_read,
            sigma_shot,
            seed,
        } => {
            let params = DegradeParams {
                gamma,
                dim,
                sigma_read,
                sigma_shot,
                seed,
            };
            params.validate()?;
            save_image(&degrade(&load_image(&input)?, &params)?, &output)?;
        }
        Command::Metrics { a, b } => {
            let (a, b) = (load_image(&a)?, load_image(&b)?);
            emit(out, &format!("psnr={:.3}", psnr(&a, &b)?))?;
            emit(out, &format!("ssim={:.6}", ssim(&a, &b)?))?;
            emit(out, &format!("edge={:.6}", edge_loss(&a, &b)?))?;
        }
        Command::InitWeights {
            output,
            seed,
            config,
            summary,
        } => {
            let cfg = config_with(config.as_deref(), None)?;
            let store = init_weights(seed, &cfg);
            save_weights(&store, &output)?;
            if summary {
                emit(out, &format!("tensors={}", store.len()))?;
                emit(out, &format!("parameters={}", store.param_count()))?;
            }
        }
        Command::Selftest => {
            let mut failures = 0;
            for (name, check) in SELFTESTS {
                let verdict = check();
                if let Err(msg) = &verdict {
                    failures += 1;
                    emit(out, &format!("FAIL {name}: {msg}"))?;
                } else {
                    emit(out, &format!("ok   {name}"))?;
                }
            }
            emit(
                out,
                &format!("{} checks, {failures} failed", SELFTESTS.len()),
            )?;
            return Ok(if failures == 0 { 0 } else { 1 });
        }
    }
    Ok(0)
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    cli_dispatch_to(argv, &mut stdout.lock())
}

/// [`cli_dispatch`] with standard output redirected to `out`.
pub fn cli_dispatch_to<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type Check = fn() -> std::result::Result<(), String>;

const SELFTESTS: [(&str, Check); 9] = [
    ("dct matches naive sum", check_dct),
    ("band masks partition the spectrum", check_masks),
    ("hvi round trip", check_hvi),
    ("zero-weight experts are identities", check_experts),
    ("neutral fdd doubles its input", check_fdd),
    ("weight container round trip", check_container),
    ("png round trip", check_png),
    ("metrics on identical images", check_metrics),
    ("enhance is deterministic", check_enhance),
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_tensor(seed: u64, c: usize, h: usize, w: usize, lo: f32, hi: f32) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(c, h, w, |_, _, _| rng.gen_range(lo..hi))
}

fn check_dct() -> std::result::Result<(), String> {
    for (seed, (h, w)) in [(8usize, 8usize), (16, 12), (17, 5)]
        .into_iter()
        .enumerate()
    {
        let x = random_tensor(seed as u64, 2, h, w, -1.0, 1.0);
        let fast = dct2(&x);
        let err = fast.max_abs_diff(&dct2_naive(&x));
        ensure(err <= 1e-5, || format!("{h}x{w}: fast vs naive {err}"))?;
        let rel = (fast.sum_sq() - x.sum_sq()).abs() / x.sum_sq();
        ensure(rel <= 1e-6, || format!("{h}x{w}: Parseval error {rel}"))?;
        let back = idct2(&fast).max_abs_diff(&x);
        ensure(back <= 1e-6, || format!("{h}x{w}: inverse error {back}"))?;
    }
    Ok(())
}

fn check_masks() -> std::result::Result<(), String> {
    let m = band_masks(8, 8, 0.25, 0.5).map_err(|e| e.to_string())?;
    let counts = (m.count_low(), m.count_mid(), m.count_high());
    ensure(counts == (4, 12, 48), || format!("8x8 counts {counts:?}"))?;
    for h in [4, 13, 64] {
        for w in [4, 9, 64] {
            let m = band_masks(h, w, 0.25, 0.5).map_err(|e| e.to_string())?;
            let ok = (0..h * w).all(|i| m.low[i] as u8 + m.mid[i] as u8 + m.high[i] as u8 == 1);
            ensure(ok, || format!("{h}x{w} is not a partition"))?;
        }
    }
    Ok(())
}

fn check_hvi() -> std::result::Result<(), String> {
    let img = RgbImage::new(random_tensor(3, 3, 16, 16, 0.05, 1.0)).map_err(|e| e.to_string())?;
    for k in [0.5f32, 1.0, 2.0] {
        let back = hvi_forward(&img, k)
            .and_then(|h| hvi_inverse(&h))
            .map_err(|e| e.to_string())?;
        let err = back.tensor().max_abs_diff(img.tensor());
        ensure(err <= 1e-4, || format!("k={k}: round trip error {err}"))?;
    }
    Ok(())
}

fn check_experts() -> std::result::Result<(), String> {
    let cfg = FddConfig::default();
    let w = fdd_zero_weights(&cfg);
    let x = random_tensor(4, cfg.channels, 8, 8, -2.0, 2.0);
    let outs = [
        gcm_forward(&x, &w, &cfg),
        drg_forward(&x, &w, &cfg),
        ansu_forward(&x, &w, &cfg),
    ];
    for (name, out) in ["gcm", "drg", "ansu"].iter().zip(outs) {
        let out = out.map_err(|e| e.to_string())?;
        ensure(out.bitwise_eq(&x), || format!("{name} changed its input"))?;
    }
    Ok(())
}

fn check_fdd() -> std::result::Result<(), String> {
    let cfg = FddConfig::default();
    let x = random_tensor(5, cfg.channels, 16, 16, -1.0, 1.0);
    let y = fdd_apply(&x, &fdd_zero_weights(&cfg), &cfg).map_err(|e| e.to_string())?;
    let err = y.max_abs_diff(&x.scale(2.0));
    ensure(err <= 1e-5, || format!("error {err}"))
}

fn check_container() -> std::result::Result<(), String> {
    let store = init_weights(6, &EnhanceConfig::default());
    let bytes = encode_weights(&store).map_err(|e| e.to_string())?;
    let back = decode_weights(&bytes).map_err(|e| e.to_string())?;
    ensure(back == store, || "decoded store differs".into())?;
    let mut bad = bytes;
    bad[0] = b'X';
    match decode_weights(&bad) {
        Err(Error::Format { offset: 0, .. }) => Ok(()),
        other => Err(format!("bad magic not rejected at offset 0: {other:?}")),
    }
}

fn check_png() -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let img = RgbImage::from_fn(5, 7, |_, _, _| f32::from(rng.gen::<u8>()) / 255.0);
    let bytes = encode_png(&img).map_err(|e| e.to_string())?;
    let back = decode_png(&bytes).map_err(|e| e.to_string())?;
    ensure(back.tensor().bitwise_eq(img.tensor()), || {
        "pixels changed".into()
    })
}

fn check_metrics() -> std::result::Result<(), String> {
    let img = RgbImage::new(random_tensor(8, 3, 16, 16, 0.0, 1.0)).map_err(|e| e.to_string())?;
    let p = psnr(&img, &img).map_err(|e| e.to_string())?;
    let s = ssim(&img, &img).map_err(|e| e.to_string())?;
    let e = edge_loss(&img, &img).map_err(|e| e.to_string())?;
    ensure((p, s, e) == (99.0, 1.0, 0.0), || {
        format!("psnr={p} ssim={s} edge={e}")
    })
}

fn check_enhance() -> std::result::Result<(), String> {
    let cfg = EnhanceConfig::default();
    let w = init_weights(9, &cfg);
    let img = RgbImage::new(random_tensor(10, 3, 32, 32, 0.0, 0.3)).map_err(|e| e.to_string())?;
    let a = enhance(&img, &w, &cfg).map_err(|e| e.to_string())?;
    let b = enhance(&img, &w, &cfg).map_err(|e| e.to_string())?;
    ensure(a.tensor().is_finite(), || "non-finite output".into())?;
    ensure(a.tensor().bitwise_eq(b.tensor()), || {
        "outputs differ between runs".into()
    })
}
