use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffnet::{grad_check, GradCheckOptions, GradCheckReport};
use crate::implicit::{ImplicitModel, ModelConfig};
use crate::layout::{rasterize, sample_coords, FitPolicy, SampleMode};
use crate::roomgen::{generate_anchor, mix_seed, SizeRange};
use crate::Result;

/// Finite-difference check of the full training objective (encoder, generator,
/// renderer and all three loss terms) on one generated room.
///
/// `W_g` is redrawn from U(-0.5, 1.5) so that both grouping-penalty branches
/// carry gradient; the default U(0, 0.02) init would leave them flat.
pub fn check_pipeline_gradients(
    config: &ModelConfig,
    seed: u64,
    coord_samples: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut model = ImplicitModel::new(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0, 0x67));
    for v in model.store.get_mut(model.wg).value.data_mut() {
        *v = rng.random_range(-0.5..1.5);
    }
    let room = generate_anchor(mix_seed(seed, 1, 0x67), 6, SizeRange::default())?;
    let grid = rasterize(&room, config.resolution, FitPolicy::default())?;
    let samples = vec![sample_coords(
        &grid,
        coord_samples,
        SampleMode::UniformRandom,
        mix_seed(seed, 2, 0x67),
    )];
    let frozen = model.clone();
    grad_check(
        &mut model.store,
        |g| Ok(frozen.objective(g, &[&grid], &samples)?.total),
        options,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_pipeline_passes() {
        let r =
            check_pipeline_gradients(&ModelConfig::tiny(), 11, 16, &GradCheckOptions::default())
                .unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(
            r.params.len(),
            ImplicitModel::new(ModelConfig::tiny(), 0)
                .unwrap()
                .store
                .len()
        );
    }
}
