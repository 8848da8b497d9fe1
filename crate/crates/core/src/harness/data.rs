use std::path::Path;

use rayon::prelude::*;

use super::config::{RegressorInput, TrainConfig};
use crate::layout::{rasterize, FitPolicy, OccupancyGrid, RoomLayout};
use crate::panorama::{boundary_map_file_name, read_boundary_map, render_boundaries};
use crate::roomgen::Dataset;
use crate::{Error, Result};

/// Layouts with their rasterized grids, in manifest order.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub ids: Vec<String>,
    pub layouts: Vec<RoomLayout>,
    pub grids: Vec<OccupancyGrid>,
    pub manifest_hash: String,
}

impl Prepared {
    pub fn new(dataset: &Dataset, resolution: usize) -> Result<Self> {
        let grids = dataset
            .layouts
            .par_iter()
            .map(|l| rasterize(l, resolution, FitPolicy::default()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            ids: dataset
                .manifest
                .layouts
                .iter()
                .map(|e| e.id.clone())
                .collect(),
            layouts: dataset.layouts.clone(),
            grids,
            manifest_hash: dataset.manifest.hash(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Regressor inputs rendered in memory: analytic boundary maps or the grids.
    pub fn regressor_inputs(&self, config: &TrainConfig) -> Result<Vec<Vec<f64>>> {
        match config.regressor_input {
            RegressorInput::OccupancyGrid => {
                Ok(self.grids.iter().map(OccupancyGrid::as_f64).collect())
            }
            RegressorInput::BoundaryMap => self
                .layouts
                .par_iter()
                .map(|l| {
                    render_boundaries(l, config.image_width, config.image_height, config.sigma_px)
                        .map(|m| m.data)
                })
                .collect(),
        }
    }

    /// Regressor inputs read from `<id>.sbm.pgm` files in `dir` (boundary-map mode)
    /// or taken from the grids.
    pub fn load_regressor_inputs(&self, config: &TrainConfig, dir: &Path) -> Result<Vec<Vec<f64>>> {
        if config.regressor_input == RegressorInput::OccupancyGrid {
            return self.regressor_inputs(config);
        }
        self.ids
            .iter()
            .map(|id| {
                let path = dir.join(boundary_map_file_name(id));
                if !path.exists() {
                    return Err(Error::MissingBoundaryMap(id.clone()));
                }
                let map = read_boundary_map(&path)?;
                if (map.width, map.height) != (config.image_width, config.image_height) {
                    return Err(Error::ResolutionMismatch {
                        expected: vec![config.image_height, config.image_width],
                        got: vec![map.height, map.width],
                    });
                }
                Ok(map.data)
            })
            .collect()
    }
}
