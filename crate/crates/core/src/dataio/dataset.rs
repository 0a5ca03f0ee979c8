//! Line-delimited JSON dataset: a header line, then one sample per line.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::map::read_map;
use crate::dataio::{from_json_with_path, write_atomic};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::grid::OccupancyGrid;
use crate::observation::Sample;

pub const DATASET_VERSION: u32 = 1;
pub const DATASET_FORMAT: &str = "navimpress-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    /// Map file, relative to the dataset's directory.
    pub map: Option<String>,
    pub feature_config: FeatureConfig,
    pub count: usize,
}

impl DatasetHeader {
    pub fn new(map: Option<String>, feature_config: FeatureConfig, count: usize) -> Self {
        DatasetHeader { format: DATASET_FORMAT.into(), version: DATASET_VERSION, map, feature_config, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(map: Option<String>, feature_config: FeatureConfig, samples: Vec<Sample>) -> Self {
        Dataset { header: DatasetHeader::new(map, feature_config, samples.len()), samples }
    }

    /// Resolve the referenced map relative to `dataset_path`.
    pub fn map_path(&self, dataset_path: &Path) -> Option<PathBuf> {
        let m = self.header.map.as_ref()?;
        Some(dataset_path.parent().unwrap_or(Path::new(".")).join(m))
    }

    pub fn load_map(&self, dataset_path: &Path) -> Result<OccupancyGrid> {
        let p = self
            .map_path(dataset_path)
            .ok_or_else(|| Error::Config(format!("{} does not reference a map", dataset_path.display())))?;
        read_map(&p)
    }
}

pub fn format_dataset(ds: &Dataset) -> Result<String> {
    let mut header = ds.header.clone();
    header.count = ds.samples.len();
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for s in &ds.samples {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_dataset(text: &str, path: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Parse { path: path.into(), line: 1, message: "missing header".into() })?;
    let header: DatasetHeader = from_json_with_path(first, path, 0)
        .map_err(|e| Error::Parse { path: path.into(), line: 1, message: format!("header: {e}") })?;
    if header.format != DATASET_FORMAT {
        return Err(Error::Parse { path: path.into(), line: 1, message: format!("not a dataset file (format `{}`)", header.format) });
    }
    if header.version != DATASET_VERSION {
        return Err(Error::VersionMismatch { what: "dataset", found: header.version, expected: DATASET_VERSION });
    }
    let mut samples = Vec::with_capacity(header.count);
    let mut ids = HashSet::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: Sample = from_json_with_path(line, path, i)?;
        s.validate().map_err(|e| Error::Schema { path: path.into(), record: i, field: "frames".into(), message: e.to_string() })?;
        if !ids.insert(s.sample_id.clone()) {
            return Err(Error::Schema {
                path: path.into(),
                record: i,
                field: "sample_id".into(),
                message: format!("duplicate id {}", s.sample_id),
            });
        }
        samples.push(s);
    }
    if samples.len() != header.count {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("header announces {} samples, file has {}", header.count, samples.len()),
        });
    }
    Ok(Dataset { header, samples })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, format_dataset(ds)?.as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::observation::{BlendShapeVector, FrameObservation, GazeVec, Phase, Ratings, WINDOW_FRAMES};

    pub(crate) fn sample(id: &str) -> Sample {
        let frames = (0..WINDOW_FRAMES)
            .map(|k| FrameObservation {
                t: 10.0 + 0.2 * k as f64,
                robot: Pose2D::new(1.0 + 0.1 * k as f64, 2.0, 0.1),
                user: Pose2D::new(0.5, 2.0, 0.0),
                gaze: GazeVec::from_direction(1.0, 0.2, -0.1).unwrap(),
                blend: BlendShapeVector::new((0..73).map(|i| i as f64 / 100.0).collect()).unwrap(),
                pedestrians: vec![Pose2D::new(3.0, 3.0, 1.0)],
                goal: Pose2D::new(20.0, 2.0, 0.0),
            })
            .collect();
        Sample {
            sample_id: id.into(),
            participant_id: "p00".into(),
            task_id: 1,
            phase: Phase::After,
            frames,
            labels: Ratings::new(3, 4, 2).unwrap(),
        }
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = Dataset::new(None, FeatureConfig::default(), vec![]);
        let text = format_dataset(&ds).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_dataset(&text, "d").unwrap(), ds);
    }

    #[test]
    fn sample_round_trip_is_exact() {
        let ds = Dataset::new(Some("w.map".into()), FeatureConfig::default(), vec![sample("a"), sample("b")]);
        let text = format_dataset(&ds).unwrap();
        let back = parse_dataset(&text, "d").unwrap();
        assert_eq!(back, ds);
        assert_eq!(format_dataset(&back).unwrap(), text);
        let rec = text.lines().nth(1).unwrap();
        for key in ["\"sample_id\"", "\"frames\"", "\"robot\"", "\"gaze\"", "\"blend\"", "\"peds\"", "\"goal\"", "\"labels\""] {
            assert!(rec.contains(key), "{key}");
        }
    }

    #[test]
    fn short_blend_vector_is_rejected_with_path() {
        let ds = Dataset::new(None, FeatureConfig::default(), vec![sample("a")]);
        let text = format_dataset(&ds).unwrap().replacen(",0.72]", "]", 1);
        match parse_dataset(&text, "d").unwrap_err() {
            Error::Schema { record, field, .. } => {
                assert_eq!(record, 0);
                assert!(field.starts_with("frames[0].blend"), "{field}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn count_and_version_are_checked() {
        let ds = Dataset::new(None, FeatureConfig::default(), vec![sample("a")]);
        let text = format_dataset(&ds).unwrap();
        let truncated: String = text.lines().next().unwrap().to_string() + "\n";
        assert!(parse_dataset(&truncated, "d").is_err());
        let v2 = text.replace("\"version\":1", "\"version\":2");
        assert!(matches!(parse_dataset(&v2, "d"), Err(Error::VersionMismatch { found: 2, .. })));
    }
}
