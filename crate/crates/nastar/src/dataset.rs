//! Dataset directories.
//!
//! ```text
//! DIR/maps/000000.pgm     binary maps (P5) or images (P6, 000000.ppm)
//! DIR/instances.jsonl     one instance per line
//! DIR/meta.json           generation spec, per-map seeds, notes
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nastar_core::datagen::{Band, Dataset, DatasetEntry, DatasetSpec, MapRecord, Split};
use nastar_core::{GridMap, MapKind, NodeIndex, NodeMask, ProblemInstance};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{encode_map, read_file, read_map, write_atomic};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLine {
    pub id: u64,
    pub map: String,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub gt_path: Vec<[usize; 2]>,
    pub split: Split,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub maps: Vec<MapRecord>,
    pub notes: Vec<String>,
}

pub fn map_file_name(map_id: u64, kind: MapKind) -> String {
    let ext = match kind {
        MapKind::Binary => "pgm",
        MapKind::Image => "ppm",
    };
    format!("maps/{map_id:06}.{ext}")
}

/// Orders a shortest-path mask from `start` to `goal`. Falls back to
/// row-major order when the mask is not a simple chain.
pub fn ordered_path(mask: &NodeMask, start: NodeIndex, goal: NodeIndex) -> Vec<NodeIndex> {
    let nodes = mask.nodes();
    let mut path = vec![start];
    let mut prev: Option<NodeIndex> = None;
    let mut cur = start;
    while cur != goal && path.len() <= nodes.len() {
        let next: Vec<NodeIndex> =
            nodes.iter().copied().filter(|&v| v != cur && Some(v) != prev && v.is_adjacent(cur)).collect();
        if next.len() != 1 {
            return nodes;
        }
        prev = Some(cur);
        cur = next[0];
        path.push(cur);
    }
    if cur == goal && path.len() == nodes.len() {
        path
    } else {
        nodes
    }
}

fn pair(v: NodeIndex) -> [usize; 2] {
    [v.row, v.col]
}

fn node(p: [usize; 2]) -> NodeIndex {
    NodeIndex::new(p[0], p[1])
}

pub fn instance_line(entry: &DatasetEntry) -> InstanceLine {
    let inst = &entry.instance;
    let gt = inst.gt_path.as_ref().map(|m| ordered_path(m, inst.start, inst.goal)).unwrap_or_default();
    InstanceLine {
        id: entry.id,
        map: map_file_name(entry.map_id, inst.map.kind()),
        start: pair(inst.start),
        goal: pair(inst.goal),
        gt_path: gt.into_iter().map(pair).collect(),
        split: entry.split,
        band: entry.band,
    }
}

fn notes(spec: &DatasetSpec) -> Vec<String> {
    let mut n = vec![
        "obstacle styles RandomBlocks and Maze are synthetic stand-ins for a multi-generator map collection"
            .to_string(),
        "start bands: [p55, p70), [p70, p85), [p85, max] of the goal's Dijkstra costs".to_string(),
    ];
    if spec.image_mode {
        n.push(
            "image maps: road-coloured free space, vegetation-coloured obstacles; obstacle masks are not stored".into(),
        );
    }
    n
}

/// Writes the dataset directory. Each file is written atomically.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    let maps_dir = dir.join("maps");
    fs::create_dir_all(&maps_dir).map_err(|e| Error::io(&maps_dir, e))?;
    for (id, map) in ds.maps.iter().enumerate() {
        write_atomic(&dir.join(map_file_name(id as u64, map.kind())), &encode_map(map))?;
    }
    let mut lines = String::new();
    for e in &ds.entries {
        lines.push_str(&serde_json::to_string(&instance_line(e)).expect("serializable"));
        lines.push('\n');
    }
    write_atomic(&dir.join("instances.jsonl"), lines.as_bytes())?;
    let meta = Meta {
        format_version: FORMAT_VERSION,
        spec: ds.spec.clone(),
        maps: ds.records.clone(),
        notes: notes(&ds.spec),
    };
    let json = serde_json::to_string_pretty(&meta).expect("serializable");
    write_atomic(&dir.join("meta.json"), json.as_bytes())
}

fn parse_map_id(name: &str) -> Option<u64> {
    let stem = Path::new(name).file_stem()?.to_str()?;
    stem.parse().ok()
}

/// Loads a dataset directory, validating every instance.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let meta: Meta =
        serde_json::from_slice(&read_file(&meta_path)?).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::format(&meta_path, format!("unsupported format version {}", meta.format_version)));
    }
    let inst_path = dir.join("instances.jsonl");
    let text = String::from_utf8(read_file(&inst_path)?).map_err(|_| Error::format(&inst_path, "not UTF-8"))?;
    let mut maps: BTreeMap<u64, GridMap> = BTreeMap::new();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::format(&inst_path, format!("line {}: {msg}", lineno + 1));
        let l: InstanceLine = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        let map_id = parse_map_id(&l.map).ok_or_else(|| at(format!("cannot parse a map id from `{}`", l.map)))?;
        if !maps.contains_key(&map_id) {
            maps.insert(map_id, read_map(&dir.join(&l.map))?);
        }
        let map = maps[&map_id].clone();
        let (h, w) = (map.height(), map.width());
        let inst = ProblemInstance::new(map, node(l.start), node(l.goal)).map_err(|e| at(e.to_string()))?;
        let inst = if l.gt_path.is_empty() {
            inst
        } else {
            let nodes: Vec<NodeIndex> = l.gt_path.iter().map(|&p| node(p)).collect();
            let mask = NodeMask::from_nodes(h, w, &nodes).map_err(|e| at(e.to_string()))?;
            inst.with_gt_path(mask).map_err(|e| at(e.to_string()))?
        };
        entries.push(DatasetEntry { id: l.id, map_id, split: l.split, band: l.band, instance: inst });
    }
    let count = meta.maps.len() as u64;
    if let Some((&id, _)) = maps.iter().find(|(&id, _)| id >= count) {
        return Err(Error::format(&meta_path, format!("map {id} is not listed in meta.json")));
    }
    let mut dense = Vec::with_capacity(meta.maps.len());
    for (i, rec) in meta.maps.iter().enumerate() {
        let map = match maps.remove(&(i as u64)) {
            Some(m) => m,
            None => {
                let kind = if meta.spec.image_mode { MapKind::Image } else { MapKind::Binary };
                read_map(&dir.join(map_file_name(rec.map_id, kind)))?
            }
        };
        dense.push(map);
    }
    Ok(Dataset { spec: meta.spec, maps: dense, records: meta.maps, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nastar_core::datagen::{generate, ObstacleStyle};

    #[test]
    fn ordered_path_walks_chain() {
        let nodes = [(2, 0), (1, 1), (0, 2), (0, 3)].map(|(r, c)| NodeIndex::new(r, c));
        let mask = NodeMask::from_nodes(3, 4, &nodes).unwrap();
        assert_eq!(ordered_path(&mask, nodes[0], nodes[3]), nodes.to_vec());
    }

    #[test]
    fn round_trip_binary_and_image() {
        for image_mode in [false, true] {
            let mut spec = DatasetSpec::new(ObstacleStyle::RandomBlocks, 16, 16, (2, 1, 1), 5);
            spec.image_mode = image_mode;
            let ds = generate(&spec).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_dataset(dir.path(), &ds).unwrap();
            assert_eq!(read_dataset(dir.path()).unwrap(), ds);
        }
    }
}
