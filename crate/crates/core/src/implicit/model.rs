//! The implicit encoder: self-encoder, hyperplane generator and renderer weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::encoder::Encoder;
use super::generator::PlaneGenerator;
use super::loss::{total_objective, Objective};
use super::render::{coords_tensor, render_graph, HyperplaneSet, RenderVars, ShapeCode};
use crate::diffnet::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::layout::{CoordBatch, OccupancyGrid};
use crate::{Error, Result};

/// Rows per inference graph; bounds the size of the `N_p x N_c` activations.
const INFERENCE_CHUNK: usize = 8;

#[derive(Clone, Debug)]
pub struct ImplicitModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub generator: PlaneGenerator,
    /// Grouping weights, `[N_s, N_p]`.
    pub wg: ParamId,
    /// Combining weights, `[1, N_s]`.
    pub wc: ParamId,
}

impl ImplicitModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let r = config.resolution;
        let encoder = Encoder::new(
            &mut store,
            "se",
            (1, r, r),
            &config.encoder_channels,
            config.head,
            config.code_dim,
            &mut rng,
        )?;
        let generator = PlaneGenerator::new(
            &mut store,
            "hg",
            config.code_dim,
            &config.generator_hidden,
            config.n_planes,
            config.manhattan,
            &mut rng,
        )?;
        let (np, ns) = (config.n_planes, config.n_primitives);
        let wg_init = (0..ns * np).map(|_| rng.random_range(0.0..0.02)).collect();
        let wg = store.add("wg", Tensor::new(&[ns, np], wg_init)?)?;
        let wc = store.add("wc", Tensor::filled(&[1, ns], 1.0 / ns as f64))?;
        Ok(ImplicitModel {
            config,
            store,
            encoder,
            generator,
            wg,
            wc,
        })
    }

    /// Replaces all parameter values; names and shapes must match this architecture.
    pub fn load_params(&mut self, store: ParamStore) -> Result<()> {
        if store.len() != self.store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                self.store.len(),
                store.len()
            )));
        }
        for (id, p) in self.store.iter() {
            let other = store.get(id);
            if other.name != p.name || other.value.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    other.name,
                    other.value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        self.store = store;
        Ok(())
    }

    pub fn grid_tensor(&self, grids: &[&OccupancyGrid]) -> Result<Tensor> {
        let r = self.config.resolution;
        let mut data = Vec::with_capacity(grids.len() * r * r);
        for grid in grids {
            if grid.resolution() != r {
                return Err(Error::ResolutionMismatch {
                    expected: vec![r, r],
                    got: vec![grid.resolution(), grid.resolution()],
                });
            }
            data.extend(grid.values().iter().map(|&v| v as f64));
        }
        Tensor::new(&[grids.len(), 1, r, r], data)
    }

    /// Self-encoder on a graph: `[B, 1, R, R]` grids to `[B, D]` codes.
    pub fn encode_var(&self, g: &mut Graph<'_>, grids: Var) -> Result<Var> {
        self.encoder.forward(g, grids)
    }

    /// Generator and renderer on a graph.
    pub fn decode_var(&self, g: &mut Graph<'_>, codes: Var, coords: Var) -> Result<RenderVars> {
        let planes = self.generator.forward(g, codes)?;
        let wg = g.param(self.wg);
        let wc = g.param(self.wc);
        render_graph(g, planes, wg, wc, coords)
    }

    /// Training objective for a batch of grids with per-sample coordinates.
    pub fn objective(
        &self,
        g: &mut Graph<'_>,
        grids: &[&OccupancyGrid],
        samples: &[(CoordBatch, Vec<f64>)],
    ) -> Result<Objective> {
        let x = g.input(self.grid_tensor(grids)?)?;
        let codes = self.encode_var(g, x)?;
        let (coords, truth) = stack_samples(samples)?;
        let c = g.input(coords)?;
        let t = g.input(truth)?;
        let out = self.decode_var(g, codes, c)?;
        let wg = g.param(self.wg);
        let wc = g.param(self.wc);
        total_objective(g, out.o3, t, wg, wc)
    }

    pub fn encode(&self, grids: &[&OccupancyGrid]) -> Result<Vec<ShapeCode>> {
        let mut out = Vec::with_capacity(grids.len());
        for chunk in grids.chunks(INFERENCE_CHUNK) {
            let mut g = Graph::new(&self.store);
            let x = g.input(self.grid_tensor(chunk)?)?;
            let z = self.encode_var(&mut g, x)?;
            out.extend(
                g.value(z)
                    .data()
                    .chunks(self.config.code_dim)
                    .map(|c| ShapeCode { values: c.to_vec() }),
            );
        }
        Ok(out)
    }

    fn codes_tensor(&self, codes: &[ShapeCode]) -> Result<Tensor> {
        let d = self.config.code_dim;
        let mut data = Vec::with_capacity(codes.len() * d);
        for c in codes {
            if c.values.len() != d {
                return Err(Error::ShapeMismatch {
                    op: "shape code",
                    left: vec![c.values.len()],
                    right: vec![d],
                });
            }
            data.extend_from_slice(&c.values);
        }
        Tensor::new(&[codes.len(), d], data)
    }

    pub fn planes(&self, code: &ShapeCode) -> Result<HyperplaneSet> {
        let mut g = Graph::new(&self.store);
        let z = g.input(self.codes_tensor(std::slice::from_ref(code))?)?;
        let p = self.generator.forward(&mut g, z)?;
        let t = g.value(p).clone().reshaped(&[self.config.n_planes, 3])?;
        HyperplaneSet::from_tensor(&t)
    }

    /// `o3` for each code at shared coordinates.
    pub fn occupancy(&self, codes: &[ShapeCode], coords: &CoordBatch) -> Result<Vec<Vec<f64>>> {
        let ct = coords_tensor(coords);
        let mut out = Vec::with_capacity(codes.len());
        for chunk in codes.chunks(INFERENCE_CHUNK) {
            let mut g = Graph::new(&self.store);
            let z = g.input(self.codes_tensor(chunk)?)?;
            let c = g.input(ct.clone())?;
            let v = self.decode_var(&mut g, z, c)?;
            out.extend(
                g.value(v.o3)
                    .data()
                    .chunks(coords.count())
                    .map(<[f64]>::to_vec),
            );
        }
        Ok(out)
    }

    /// `o3` at all `R x R` pixel centers.
    pub fn reconstruct(&self, codes: &[ShapeCode]) -> Result<Vec<Vec<f64>>> {
        self.occupancy(codes, &CoordBatch::pixel_centers(self.config.resolution))
    }
}

/// Stacks per-sample coordinates `[B, 3, N_c]` and truths `[B, N_c]`.
pub fn stack_samples(samples: &[(CoordBatch, Vec<f64>)]) -> Result<(Tensor, Tensor)> {
    let n = samples.first().map_or(0, |s| s.0.count());
    let mut coords = Vec::with_capacity(samples.len() * 3 * n);
    let mut truth = Vec::with_capacity(samples.len() * n);
    for (c, t) in samples {
        if c.count() != n || t.len() != n {
            return Err(Error::ShapeMismatch {
                op: "coordinate batch",
                left: vec![c.count(), t.len()],
                right: vec![n],
            });
        }
        coords.extend_from_slice(c.as_slice());
        truth.extend_from_slice(t);
    }
    Ok((
        Tensor::new(&[samples.len(), 3, n], coords)?,
        Tensor::new(&[samples.len(), n], truth)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{grad_check, GradCheckOptions};
    use crate::layout::rasterize;
    use crate::layout::{sample_coords, Camera, FitPolicy, Point, RoomLayout, SampleMode};

    fn l_room(r: usize) -> OccupancyGrid {
        let corners = [(0., 0.), (4., 0.), (4., 2.), (2., 2.), (2., 4.), (0., 4.)]
            .map(|(x, y)| Point::new(x, y))
            .to_vec();
        let room = RoomLayout::new(
            "l",
            corners,
            3.0,
            Camera {
                x: 1.0,
                y: 1.0,
                height: 1.5,
            },
        )
        .unwrap();
        rasterize(&room, r, FitPolicy::default()).unwrap()
    }

    #[test]
    fn codes_are_bounded_and_deterministic() {
        let m = ImplicitModel::new(ModelConfig::tiny(), 4).unwrap();
        let grid = l_room(16);
        let a = m.encode(&[&grid, &grid]).unwrap();
        assert_eq!(a[0], a[1]);
        assert!(a[0].values.iter().all(|&v| v > 0.0 && v < 1.0));
        let b = ImplicitModel::new(ModelConfig::tiny(), 4)
            .unwrap()
            .encode(&[&grid])
            .unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn wrong_resolution_is_rejected() {
        let m = ImplicitModel::new(ModelConfig::tiny(), 0).unwrap();
        assert!(matches!(
            m.encode(&[&l_room(32)]),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    fn zero_generator(m: &mut ImplicitModel) {
        for layer in &m.generator.layers {
            for id in [layer.w, layer.b] {
                m.store.get_mut(id).value.data_mut().fill(0.0);
            }
        }
    }

    #[test]
    fn zero_generator_gives_zero_planes() {
        for manhattan in [false, true] {
            let mut m = ImplicitModel::new(
                ModelConfig {
                    manhattan,
                    ..ModelConfig::tiny()
                },
                1,
            )
            .unwrap();
            zero_generator(&mut m);
            let code = ShapeCode {
                values: vec![0.5; 8],
            };
            assert!(m
                .planes(&code)
                .unwrap()
                .planes
                .iter()
                .all(|p| *p == [0.0; 3]));
        }
    }

    #[test]
    fn manhattan_normals_are_parallel_or_orthogonal() {
        let m = ImplicitModel::new(
            ModelConfig {
                manhattan: true,
                ..ModelConfig::tiny()
            },
            9,
        )
        .unwrap();
        let codes = m.encode(&[&l_room(16)]).unwrap();
        let planes = m.planes(&codes[0]).unwrap();
        let unit: Vec<(f64, f64)> = planes
            .planes
            .iter()
            .map(|p| {
                let n = p[0].hypot(p[1]);
                (p[0] / n, p[1] / n)
            })
            .collect();
        for a in &unit {
            for b in &unit {
                let d = a.0 * b.0 + a.1 * b.1;
                assert!([0.0, 1.0, -1.0].iter().any(|t| (d - t).abs() < 1e-9), "{d}");
            }
        }
    }

    fn tiny_samples(grid: &OccupancyGrid, seed: u64) -> Vec<(CoordBatch, Vec<f64>)> {
        vec![sample_coords(grid, 16, SampleMode::UniformRandom, seed)]
    }

    #[test]
    fn full_pipeline_gradients_match_finite_differences() {
        for manhattan in [false, true] {
            let mut m = ImplicitModel::new(
                ModelConfig {
                    manhattan,
                    ..ModelConfig::tiny()
                },
                2,
            )
            .unwrap();
            // spread W_g outside [0, 1] so every loss branch carries gradient
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for v in m.store.get_mut(m.wg).value.data_mut() {
                *v = rng.random_range(-0.5..1.5);
            }
            let grid = l_room(16);
            let samples = tiny_samples(&grid, 3);
            let model = m.clone();
            let report = grad_check(
                &mut m.store,
                |g| Ok(model.objective(g, &[&grid], &samples)?.total),
                &GradCheckOptions::default(),
            )
            .unwrap();
            assert!(report.passed, "manhattan={manhattan}: {report:?}");
            assert!(report.checked > report.excluded);
        }
    }

    #[test]
    fn total_gradient_is_sum_of_part_gradients() {
        let m = ImplicitModel::new(ModelConfig::tiny(), 6).unwrap();
        let grid = l_room(16);
        let samples = tiny_samples(&grid, 1);
        let mut g = Graph::new(&m.store);
        let obj = m.objective(&mut g, &[&grid], &samples).unwrap();
        let parts = [obj.occupancy, obj.grouping, obj.combining].map(|v| g.value(v).item());
        assert!((g.value(obj.total).item() - parts.iter().sum::<f64>()).abs() < 1e-12);
        let total = g.backward(obj.total).unwrap();
        let each: Vec<_> = [obj.occupancy, obj.grouping, obj.combining]
            .iter()
            .map(|&v| g.backward(v).unwrap())
            .collect();
        for id in m.store.ids() {
            let t = total.param(id).unwrap();
            for (k, &tv) in t.data().iter().enumerate() {
                let s: f64 = each
                    .iter()
                    .filter_map(|gr| gr.param(id))
                    .map(|p| p.data()[k])
                    .sum();
                assert!((tv - s).abs() <= 1e-12 * (1.0 + tv.abs()));
            }
        }
    }
}
