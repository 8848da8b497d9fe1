//! Synthetic datasets: anchors plus augmented variants, written as layout
//! JSON files with a manifest.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::anchor::{generate_anchor, SizeRange, SUPPORTED_WALLS};
use super::augment::{augment, AugmentationRecord};
use crate::layout::io::{read_layout, write_layout};
use crate::layout::RoomLayout;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// 80/10/10 split keyed on the anchor id, so a family of augmented rooms never
/// straddles splits.
pub fn split_for(anchor_id: &str) -> Split {
    let digest = Sha256::digest(anchor_id.as_bytes());
    let v = u16::from_be_bytes([digest[0], digest[1]]) as u32;
    match v * 10 / 65536 {
        0..=7 => Split::Train,
        8 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub anchor: Option<String>,
    pub wall_index: Option<usize>,
    pub offset: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layouts: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("manifest serializes")
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes)
            .map_err(|e| Error::parse("manifest", e.line(), e.column(), e.to_string()))
    }

    /// Hex SHA-256 of the serialized manifest.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_bytes()))
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.layouts
            .iter()
            .filter(move |e| e.split == split)
            .map(|e| e.id.as_str())
    }
}

/// SplitMix64 finalizer; derives independent sub-seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedRoom {
    pub layout: RoomLayout,
    pub record: Option<AugmentationRecord>,
}

/// Parameters for [`generate_rooms`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetParams {
    pub anchors: usize,
    pub augment_factor: usize,
    pub seed: u64,
    pub size: SizeRange,
}

/// Anchors in index order, each followed by its augmented variants.
pub fn generate_rooms(params: DatasetParams) -> Result<Vec<GeneratedRoom>> {
    let families: Vec<Result<Vec<GeneratedRoom>>> = (0..params.anchors)
        .into_par_iter()
        .map(|i| {
            let i = i as u64;
            let walls = SUPPORTED_WALLS
                [(mix_seed(params.seed, i, 1) % SUPPORTED_WALLS.len() as u64) as usize];
            let mut anchor = generate_anchor(mix_seed(params.seed, i, 2), walls, params.size)?;
            anchor.id = format!("a{i:05}");
            let mut family = Vec::with_capacity(1 + params.augment_factor);
            for k in 0..params.augment_factor {
                let (mut layout, record) =
                    augment(&anchor, mix_seed(params.seed, i, 1000 + k as u64))?;
                layout.id = format!("{}_v{k:04}", anchor.id);
                family.push(GeneratedRoom {
                    layout,
                    record: Some(record),
                });
            }
            family.insert(
                0,
                GeneratedRoom {
                    layout: anchor,
                    record: None,
                },
            );
            Ok(family)
        })
        .collect();
    let mut out = Vec::new();
    for f in families {
        out.extend(f?);
    }
    Ok(out)
}

pub fn manifest_for(rooms: &[GeneratedRoom]) -> Manifest {
    Manifest {
        layouts: rooms
            .iter()
            .map(|r| {
                let root = r
                    .record
                    .as_ref()
                    .map_or(r.layout.id.as_str(), |rec| rec.anchor_id.as_str());
                ManifestEntry {
                    id: r.layout.id.clone(),
                    split: split_for(root),
                    anchor: r.record.as_ref().map(|rec| rec.anchor_id.clone()),
                    wall_index: r.record.as_ref().map(|rec| rec.wall_index),
                    offset: r.record.as_ref().map(|rec| rec.offset),
                }
            })
            .collect(),
    }
}

/// Generates and writes `<id>.json` files plus `manifest.json` into `out_dir`.
pub fn build_dataset(params: DatasetParams, out_dir: &Path) -> Result<Manifest> {
    let rooms = generate_rooms(params)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for r in &rooms {
        write_layout(&out_dir.join(format!("{}.json", r.layout.id)), &r.layout)?;
    }
    let manifest = manifest_for(&rooms);
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A dataset directory: manifest plus its layouts in manifest order.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    pub layouts: Vec<RoomLayout>,
}

impl Dataset {
    pub fn from_rooms(rooms: &[GeneratedRoom]) -> Self {
        Dataset {
            manifest: manifest_for(rooms),
            layouts: rooms.iter().map(|r| r.layout.clone()).collect(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest::from_json_bytes(&bytes)?;
        let layouts = manifest
            .layouts
            .iter()
            .map(|e| read_layout(&dir.join(format!("{}.json", e.id))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { manifest, layouts })
    }

    /// Subset restricted to one split, keeping order.
    pub fn split(&self, split: Split) -> Dataset {
        let (entries, layouts): (Vec<_>, Vec<_>) = self
            .manifest
            .layouts
            .iter()
            .zip(&self.layouts)
            .filter(|(e, _)| e.split == split)
            .map(|(e, l)| (e.clone(), l.clone()))
            .unzip();
        Dataset {
            manifest: Manifest { layouts: entries },
            layouts,
        }
    }

    pub fn len(&self) -> usize {
        self.layouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layouts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(anchors: usize, factor: usize, seed: u64) -> DatasetParams {
        DatasetParams {
            anchors,
            augment_factor: factor,
            seed,
            size: SizeRange::default(),
        }
    }

    #[test]
    fn anchors_only() {
        let rooms = generate_rooms(params(10, 0, 3)).unwrap();
        assert_eq!(rooms.len(), 10);
        assert!(rooms.iter().all(|r| r.record.is_none()));
    }

    #[test]
    fn deterministic_manifest() {
        let a = manifest_for(&generate_rooms(params(20, 2, 9)).unwrap());
        let b = manifest_for(&generate_rooms(params(20, 2, 9)).unwrap());
        assert_eq!(a.to_json_bytes(), b.to_json_bytes());
        let c = manifest_for(&generate_rooms(params(20, 2, 10)).unwrap());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn families_share_split() {
        let m = manifest_for(&generate_rooms(params(30, 3, 1)).unwrap());
        for e in &m.layouts {
            if let Some(anchor) = &e.anchor {
                assert_eq!(e.split, split_for(anchor));
            }
        }
    }

    #[test]
    fn manifest_schema() {
        let m = manifest_for(&generate_rooms(params(2, 1, 0)).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&m.to_json_bytes()).unwrap();
        let first = &v["layouts"][0];
        assert!(
            first["anchor"].is_null() && first["wall_index"].is_null() && first["offset"].is_null()
        );
        let second = &v["layouts"][1];
        assert_eq!(second["anchor"], "a00000");
        assert!(second["offset"].is_f64());
        assert!(["train", "val", "test"].contains(&second["split"].as_str().unwrap()));
    }
}
