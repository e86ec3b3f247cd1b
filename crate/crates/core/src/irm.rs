//! Illumination refinement: a small residual conv block that smooths the Max-RGB map.
//!
//! ```text
//! x   = entry(I)                      1×1, 1 → hidden
//! y   = bn(gelu(pw(dw(x))))           5×5 depthwise, 1×1 pointwise
//! out = clamp(exit(x + y), lo, hi)    1×1, hidden → 1
//! ```

use crate::error::{Error, Result};
use crate::tensor::{activation, batchnorm_infer, Activation, ConvSpec, Tensor};
use crate::weights::{seeded_rng, WeightStore};

const STREAM: u64 = 0x11;

#[derive(Clone, Debug, PartialEq)]
pub struct IrmConfig {
    pub hidden_channels: usize,
    pub core_kernel: usize,
    pub bn_eps: f32,
    /// Lower and upper bound applied to the refined map.
    pub output_clamp: (f32, f32),
}

impl Default for IrmConfig {
    fn default() -> Self {
        Self {
            hidden_channels: 8,
            core_kernel: 5,
            bn_eps: 1e-5,
            output_clamp: (1e-4, 1.0),
        }
    }
}

impl IrmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_channels == 0 {
            return Err(Error::Config("irm.hidden_channels must be >= 1".into()));
        }
        if self.core_kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "irm.core_kernel must be odd, got {}",
                self.core_kernel
            )));
        }
        let (lo, hi) = self.output_clamp;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Config(format!(
                "irm output clamp must satisfy 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    fn entry(&self) -> ConvSpec {
        ConvSpec::pointwise(1, self.hidden_channels)
    }

    fn dw(&self) -> ConvSpec {
        ConvSpec::depthwise(self.hidden_channels, self.core_kernel)
    }

    fn pw(&self) -> ConvSpec {
        ConvSpec::pointwise(self.hidden_channels, self.hidden_channels)
    }

    fn exit(&self) -> ConvSpec {
        ConvSpec::pointwise(self.hidden_channels, 1)
    }
}

pub fn irm_forward(i_initial: &Tensor, weights: &WeightStore, cfg: &IrmConfig) -> Result<Tensor> {
    cfg.validate()?;
    if i_initial.channels() != 1 {
        return Err(Error::contract(format!(
            "irm: expected a single-channel illumination map, got {} channels",
            i_initial.channels()
        )));
    }
    if let Some(v) = i_initial.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::contract(format!(
            "irm: illumination value {v} outside [0, 1]"
        )));
    }
    let x = weights.conv("irm.entry", &cfg.entry(), i_initial)?;
    let core = weights.conv("irm.core.dw", &cfg.dw(), &x)?;
    let core = weights.conv("irm.core.pw", &cfg.pw(), &core)?;
    let core = activation(&core, Activation::Gelu);
    let bn = weights.batchnorm("irm.core.bn", cfg.hidden_channels)?;
    let core = batchnorm_infer(&core, &bn, cfg.bn_eps)?;
    let z = x.add(&core)?;
    let out = weights.conv("irm.exit", &cfg.exit(), &z)?;
    let (lo, hi) = cfg.output_clamp;
    Ok(out.clamp(lo, hi))
}

/// Seeded weights, uniform in `±1/sqrt(fan_in)`, batch norm at identity.
pub fn irm_init_weights(seed: u64, cfg: &IrmConfig) -> WeightStore {
    let mut rng = seeded_rng(seed, STREAM);
    let mut store = WeightStore::new();
    store.insert_conv_uniform("irm.entry", &cfg.entry(), &mut rng);
    store.insert_conv_uniform("irm.core.dw", &cfg.dw(), &mut rng);
    store.insert_conv_uniform("irm.core.pw", &cfg.pw(), &mut rng);
    store.insert_bn_identity("irm.core.bn", cfg.hidden_channels);
    store.insert_conv_uniform("irm.exit", &cfg.exit(), &mut rng);
    store
}

/// All-zero convolutions with batch norm at identity.
pub fn irm_zero_weights(cfg: &IrmConfig) -> WeightStore {
    let mut store = WeightStore::new();
    store.insert_conv_zeros("irm.entry", &cfg.entry());
    store.insert_conv_zeros("irm.core.dw", &cfg.dw());
    store.insert_conv_zeros("irm.core.pw", &cfg.pw());
    store.insert_bn_identity("irm.core.bn", cfg.hidden_channels);
    store.insert_conv_zeros("irm.exit", &cfg.exit());
    store
}

/// Weights that make the block an exact pass-through for inputs inside the output clamp.
///
/// Channel 0 carries the input through entry and exit with unit weights while the core
/// block produces zero, so the residual sum is the input itself.
pub fn irm_identity_weights(cfg: &IrmConfig) -> WeightStore {
    let mut store = irm_zero_weights(cfg);
    store
        .get_mut("irm.entry.weight")
        .expect("entry weight")
        .data_mut()[0] = 1.0;
    store
        .get_mut("irm.exit.weight")
        .expect("exit weight")
        .data_mut()[0] = 1.0;
    store
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::digest;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(1, h, w, |_, _, _| rng.gen_range(0.0..=1.0))
    }

    #[test]
    fn zero_weights_hit_lower_clamp() {
        let cfg = IrmConfig::default();
        let out = irm_forward(&random_map(1, 9, 11), &irm_zero_weights(&cfg), &cfg).unwrap();
        assert_eq!(out.shape(), (1, 9, 11));
        assert!(out.data().iter().all(|&v| v == 1e-4));
    }

    #[test]
    fn identity_hook_passes_input_through() {
        let cfg = IrmConfig::default();
        let x = random_map(2, 8, 8).clamp(1e-4, 1.0);
        let out = irm_forward(&x, &irm_identity_weights(&cfg), &cfg).unwrap();
        assert!(out.bitwise_eq(&x));
    }

    #[test]
    fn exit_bias_alone_sets_constant_output() {
        let cfg = IrmConfig::default();
        for b in [-3.0f32, 0.37, 5.0] {
            let mut w = irm_zero_weights(&cfg);
            w.get_mut("irm.exit.bias").unwrap().data_mut()[0] = b;
            let out = irm_forward(&random_map(3, 6, 6), &w, &cfg).unwrap();
            let want = b.clamp(1e-4, 1.0);
            assert!(out.data().iter().all(|&v| v == want));
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = IrmConfig::default();
        let a = irm_init_weights(42, &cfg);
        assert_eq!(a, irm_init_weights(42, &cfg));
        assert_ne!(a, irm_init_weights(43, &cfg));
        let dw = a.get("irm.core.dw.weight").unwrap();
        assert_eq!(dw.dims(), &[8, 1, 5, 5]);
        assert!(dw.data().iter().all(|v| v.abs() <= 0.2));
        let bn = a.batchnorm("irm.core.bn", 8).unwrap();
        assert!(bn.gamma.iter().all(|&g| g == 1.0) && bn.running_var.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn missing_weight_is_named() {
        let cfg = IrmConfig::default();
        let mut w = irm_init_weights(1, &cfg);
        let mut pruned = WeightStore::new();
        for (n, p) in w.iter() {
            if n != "irm.core.pw.weight" {
                pruned.insert(n, p.clone());
            }
        }
        let err = irm_forward(&random_map(1, 5, 5), &pruned, &cfg).unwrap_err();
        assert!(err.to_string().contains("irm.core.pw.weight"));
        w.insert("irm.exit.weight", crate::weights::Param::zeros(vec![8]));
        let err = irm_forward(&random_map(1, 5, 5), &w, &cfg).unwrap_err();
        assert!(matches!(err, Error::WeightShape { .. }));
    }

    #[test]
    fn rejects_out_of_range_input() {
        let cfg = IrmConfig::default();
        let x = Tensor::full(1, 5, 5, 1.5);
        assert!(irm_forward(&x, &irm_zero_weights(&cfg), &cfg).is_err());
    }

    #[test]
    fn spike_fixture_is_pinned() {
        let cfg = IrmConfig::default();
        let mut x = Tensor::full(1, 16, 16, 0.3);
        x.set(0, 7, 9, 1.0);
        let w = irm_init_weights(2024, &cfg);
        let a = irm_forward(&x, &w, &cfg).unwrap();
        let b = irm_forward(&x, &w, &cfg).unwrap();
        assert!(a.bitwise_eq(&b));
        assert_eq!(digest(&a), IRM_SPIKE_DIGEST);
    }

    const IRM_SPIKE_DIGEST: &str =
        "3524722b14278d1449a7bef71cb6df4d6906ef4eb3432efe714141575d0cce2e";

    proptest! {
        #[test]
        fn output_is_clamped_and_shaped(seed in any::<u64>(), h in 5usize..14, w in 5usize..14) {
            let cfg = IrmConfig::default();
            let out = irm_forward(&random_map(seed, h, w), &irm_init_weights(seed, &cfg), &cfg).unwrap();
            prop_assert_eq!(out.shape(), (1, h, w));
            prop_assert!(out.data().iter().all(|&v| (1e-4..=1.0).contains(&v)));
        }
    }
}
