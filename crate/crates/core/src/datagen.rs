//! Synthetic datasets: obstacle maps, tiling, start/goal sampling, expert
//! paths, and a raw-image variant with hidden obstacle masks.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    dijkstra_field, dijkstra_shortest_path, GridMap, MapKind, NodeIndex, NodeMask, ProblemInstance, UNREACHABLE,
};
use crate::math;

/// Resampling budget for goals whose percentile bands come out empty.
pub const MAX_RESAMPLES: usize = 100;
/// Map regeneration budget when a map admits no valid goal or start.
const MAX_MAP_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstacleStyle {
    RandomBlocks,
    Maze,
    /// 2×2 tiling of four half-size maps.
    Tiled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

/// Distance band of a start relative to the goal's cost percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    None,
    B55,
    B70,
    B85,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::None => "none",
            Band::B55 => "b55",
            Band::B70 => "b70",
            Band::B85 => "b85",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartsPerMap {
    pub train: usize,
    /// Per band.
    pub val: usize,
    /// Per band.
    pub test: usize,
}

impl Default for StartsPerMap {
    fn default() -> Self {
        Self { train: 1, val: 2, test: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub height: usize,
    pub width: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub style: ObstacleStyle,
    /// Source maps for [`ObstacleStyle::Tiled`]; half the dataset's size.
    pub tile_source: Option<Box<DatasetSpec>>,
    pub starts_per_map: StartsPerMap,
    /// Render maps as RGB images with hidden obstacle masks. One start per map.
    pub image_mode: bool,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(style: ObstacleStyle, height: usize, width: usize, n: (usize, usize, usize), seed: u64) -> Self {
        let tile_source = (style == ObstacleStyle::Tiled)
            .then(|| Box::new(DatasetSpec::new(ObstacleStyle::RandomBlocks, height / 2, width / 2, (0, 0, 0), seed)));
        Self {
            height,
            width,
            n_train: n.0,
            n_val: n.1,
            n_test: n.2,
            style,
            tile_source,
            starts_per_map: StartsPerMap::default(),
            image_mode: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 4 || self.width < 4 {
            return Err(Error::invalid("maps must be at least 4x4"));
        }
        if self.style == ObstacleStyle::Tiled {
            let Some(src) = &self.tile_source else {
                return Err(Error::invalid("tiled datasets need a tile source"));
            };
            if src.height * 2 != self.height || src.width * 2 != self.width {
                return Err(Error::invalid("tile source must be half the dataset size"));
            }
            if src.style == ObstacleStyle::Tiled {
                return Err(Error::invalid("tile source cannot itself be tiled"));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A binary map of the given style. Tiled maps tile four random-block maps.
pub fn gen_map(style: ObstacleStyle, height: usize, width: usize, seed: u64) -> Result<GridMap> {
    match style {
        ObstacleStyle::RandomBlocks => random_blocks(height, width, seed),
        ObstacleStyle::Maze => maze(height, width, seed),
        ObstacleStyle::Tiled => gen_tiled(ObstacleStyle::RandomBlocks, height, width, seed),
    }
}

fn gen_tiled(source: ObstacleStyle, height: usize, width: usize, seed: u64) -> Result<GridMap> {
    if height % 2 != 0 || width % 2 != 0 {
        return Err(Error::shape("tiled maps need even dimensions"));
    }
    let parts =
        (0..4u64).map(|k| gen_map(source, height / 2, width / 2, mix_seed(seed, k))).collect::<Result<Vec<_>>>()?;
    tile_maps([&parts[0], &parts[1], &parts[2], &parts[3]])
}

/// Axis-aligned rectangles until the occupancy reaches a target drawn from [0.2, 0.3].
fn random_blocks(height: usize, width: usize, seed: u64) -> Result<GridMap> {
    if height < 4 || width < 4 {
        return Err(Error::invalid("maps must be at least 4x4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.gen_range(0.20..=0.30);
    let n = height * width;
    let mut cells = vec![1u8; n];
    let mut blocked = 0usize;
    let max_h = (height / 4).max(2);
    let max_w = (width / 4).max(2);
    while (blocked as f64) < target * n as f64 {
        let bh = rng.gen_range(1..=max_h);
        let bw = rng.gen_range(1..=max_w);
        let r0 = rng.gen_range(0..=height - bh);
        let c0 = rng.gen_range(0..=width - bw);
        for r in r0..r0 + bh {
            for c in c0..c0 + bw {
                let i = r * width + c;
                if cells[i] == 1 {
                    cells[i] = 0;
                    blocked += 1;
                }
            }
        }
    }
    GridMap::binary(height, width, cells)
}

/// Recursive division: walls on odd coordinates with one gap on an even
/// coordinate, so every chamber stays connected.
fn maze(height: usize, width: usize, seed: u64) -> Result<GridMap> {
    if height < 4 || width < 4 {
        return Err(Error::invalid("maps must be at least 4x4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = vec![1u8; height * width];
    let mut stack = vec![(0usize, height - 1, 0usize, width - 1)];
    while let Some((r0, r1, c0, c1)) = stack.pop() {
        let rows: Vec<usize> = (r0 + 1..r1).filter(|r| r % 2 == 1).collect();
        let cols: Vec<usize> = (c0 + 1..c1).filter(|c| c % 2 == 1).collect();
        let horizontal = match (rows.is_empty(), cols.is_empty()) {
            (true, true) => continue,
            (false, true) => true,
            (true, false) => false,
            _ if r1 - r0 > c1 - c0 => true,
            _ if c1 - c0 > r1 - r0 => false,
            _ => rng.gen_bool(0.5),
        };
        if horizontal {
            let r = *rows.choose(&mut rng).expect("non-empty");
            let gaps: Vec<usize> = (c0..=c1).filter(|c| c % 2 == 0).collect();
            let gap = *gaps.choose(&mut rng).expect("even column");
            for c in c0..=c1 {
                if c != gap {
                    cells[r * width + c] = 0;
                }
            }
            stack.push((r0, r - 1, c0, c1));
            stack.push((r + 1, r1, c0, c1));
        } else {
            let c = *cols.choose(&mut rng).expect("non-empty");
            let gaps: Vec<usize> = (r0..=r1).filter(|r| r % 2 == 0).collect();
            let gap = *gaps.choose(&mut rng).expect("even row");
            for r in r0..=r1 {
                if r != gap {
                    cells[r * width + c] = 0;
                }
            }
            stack.push((r0, r1, c0, c - 1));
            stack.push((r0, r1, c + 1, c1));
        }
    }
    GridMap::binary(height, width, cells)
}

/// 2×2 tiling in reading order: top-left, top-right, bottom-left, bottom-right.
pub fn tile_maps(sources: [&GridMap; 4]) -> Result<GridMap> {
    let (h, w) = (sources[0].height(), sources[0].width());
    if sources.iter().any(|m| m.height() != h || m.width() != w) {
        return Err(Error::shape("tiles must share one size"));
    }
    let mut parts = Vec::with_capacity(4);
    for m in sources {
        parts.push(m.binary_cells().ok_or_else(|| Error::invalid("only binary maps can be tiled"))?);
    }
    let mut cells = vec![0u8; 4 * h * w];
    for (k, src) in parts.iter().enumerate() {
        let (dr, dc) = ((k / 2) * h, (k % 2) * w);
        for r in 0..h {
            let dst = (dr + r) * 2 * w + dc;
            cells[dst..dst + w].copy_from_slice(&src[r * w..(r + 1) * w]);
        }
    }
    GridMap::binary(2 * h, 2 * w, cells)
}

/// Cost percentiles of the goal's Dijkstra field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileBands {
    pub p55: f64,
    pub p70: f64,
    pub p85: f64,
    pub max: f64,
}

impl PercentileBands {
    /// Percentiles over every finite cost, the goal's zero included.
    pub fn from_costs(costs: &[f64]) -> Result<Self> {
        let mut finite: Vec<f64> = costs.iter().copied().filter(|&c| c != UNREACHABLE).collect();
        if finite.is_empty() {
            return Err(Error::Empty);
        }
        finite.sort_by(f64::total_cmp);
        Ok(Self {
            p55: math::percentile_sorted(&finite, 55.0),
            p70: math::percentile_sorted(&finite, 70.0),
            p85: math::percentile_sorted(&finite, 85.0),
            max: finite[finite.len() - 1],
        })
    }

    /// Band of a cost: `[p55, p70)`, `[p70, p85)`, `[p85, max]`.
    pub fn band_of(&self, cost: f64) -> Option<Band> {
        if cost == UNREACHABLE || cost < self.p55 {
            None
        } else if cost < self.p70 {
            Some(Band::B55)
        } else if cost < self.p85 {
            Some(Band::B70)
        } else {
            Some(Band::B85)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartSample {
    pub goal: NodeIndex,
    pub starts: Vec<(NodeIndex, Band)>,
    pub bands: PercentileBands,
    /// Some band had fewer cells than requested and was sampled with replacement.
    pub with_replacement: bool,
}

fn corner_cells(map: &GridMap, corner: usize) -> Vec<NodeIndex> {
    let (h, w) = (map.height(), map.width());
    let (rh, rw) = ((h / 4).max(1), (w / 4).max(1));
    let rows = if corner / 2 == 0 { 0..rh } else { h - rh..h };
    let cols = if corner % 2 == 0 { 0..rw } else { w - rw..w };
    let mut out = Vec::new();
    for r in rows {
        for c in cols.clone() {
            let v = NodeIndex::new(r, c);
            if map.is_passable(v) {
                out.push(v);
            }
        }
    }
    out
}

fn pick_goal(map: &GridMap, rng: &mut ChaCha8Rng) -> Result<NodeIndex> {
    let mut corners = [0usize, 1, 2, 3];
    corners.shuffle(rng);
    for corner in corners {
        let cells = corner_cells(map, corner);
        if let Some(&g) = cells.choose(rng) {
            return Ok(g);
        }
    }
    Err(Error::NoValidGoal)
}

fn draw(cands: &[NodeIndex], k: usize, rng: &mut ChaCha8Rng, replaced: &mut bool) -> Vec<NodeIndex> {
    if cands.len() >= k {
        cands.choose_multiple(rng, k).copied().collect()
    } else {
        *replaced = true;
        (0..k).map(|_| *cands.choose(rng).expect("non-empty")).collect()
    }
}

/// A corner-region goal and starts drawn from its cost percentile bands.
///
/// Train draws `per_band` starts at or above the 55th percentile (band
/// `None`); validation and test draw `per_band` starts from each of the three
/// bands. The goal is resampled when a band is empty.
pub fn sample_goal_and_starts(map: &GridMap, split: Split, per_band: usize, seed: u64) -> Result<StartSample> {
    if map.kind() != MapKind::Binary {
        return Err(Error::invalid("start sampling needs a binary map"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let goal = pick_goal(map, &mut rng)?;
        let field = dijkstra_field(map, goal);
        let costs = field.values();
        let bands = PercentileBands::from_costs(costs)?;
        let mut buckets: [Vec<NodeIndex>; 4] = Default::default();
        for (i, &c) in costs.iter().enumerate() {
            if c > 0.0 {
                if let Some(b) = bands.band_of(c) {
                    buckets[b as usize].push(map.node(i));
                }
            }
        }
        let mut replaced = false;
        let starts = match split {
            Split::Train => {
                let above: Vec<NodeIndex> = buckets[1..].iter().flatten().copied().collect();
                if above.is_empty() {
                    continue;
                }
                draw(&above, per_band, &mut rng, &mut replaced).into_iter().map(|v| (v, Band::None)).collect()
            }
            Split::Val | Split::Test => {
                if buckets[1..].iter().any(|b| b.is_empty()) {
                    continue;
                }
                let mut out = Vec::with_capacity(3 * per_band);
                for (band, cands) in [Band::B55, Band::B70, Band::B85].into_iter().zip(&buckets[1..]) {
                    out.extend(draw(cands, per_band, &mut rng, &mut replaced).into_iter().map(|v| (v, band)));
                }
                out
            }
        };
        return Ok(StartSample { goal, starts, bands, with_replacement: replaced });
    }
    Err(Error::EmptyBand)
}

/// Attaches the Dijkstra shortest path as the expert path.
pub fn label_instance(inst: ProblemInstance) -> Result<ProblemInstance> {
    let r = dijkstra_shortest_path(&inst)?;
    let mask = NodeMask::from_nodes(inst.height(), inst.width(), &r.path)?;
    inst.with_gt_path(mask)
}

/// An RGB rendering of a random-block map with its expert path. The hidden
/// obstacle mask is returned alongside but not stored in the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub instance: ProblemInstance,
    pub hidden: GridMap,
}

const ROAD: [f64; 3] = [0.62, 0.58, 0.52];
const VEGETATION: [f64; 3] = [0.16, 0.42, 0.18];

/// Road-coloured passable cells with pixel noise; obstacles in a vegetation
/// family with a coarse texture. Values are multiples of `1/255` in `[0, 1]`,
/// so 8-bit image files store them exactly.
pub fn render_image(hidden: &GridMap, seed: u64) -> Result<GridMap> {
    let cells = hidden.binary_cells().ok_or_else(|| Error::invalid("rendering needs a binary map"))?;
    let (h, w) = (hidden.height(), hidden.width());
    let n = h * w;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tint: [f64; 3] = core::array::from_fn(|_| rng.gen_range(-0.05..=0.05));
    let mut planes = vec![0.0; 3 * n];
    for (i, &passable) in cells.iter().enumerate() {
        let (r, c) = (i / w, i % w);
        let (base, noise) = if passable == 1 {
            (ROAD, rng.gen_range(-0.06..=0.06))
        } else {
            let texture = if (r / 2 + c / 2) % 2 == 0 { 0.05 } else { -0.05 };
            (VEGETATION, texture + rng.gen_range(-0.08..=0.08))
        };
        for ch in 0..3 {
            let v = (base[ch] + tint[ch] + noise).clamp(0.0, 1.0);
            planes[ch * n + i] = libm::round(v * 255.0) / 255.0;
        }
    }
    GridMap::image(h, w, planes)
}

pub fn gen_image_instance(height: usize, width: usize, seed: u64) -> Result<ImageSample> {
    let mut last = Error::NoValidGoal;
    for attempt in 0..MAX_MAP_ATTEMPTS {
        let s = mix_seed(seed, attempt);
        let hidden = gen_map(ObstacleStyle::RandomBlocks, height, width, mix_seed(s, 1))?;
        let sample = match sample_goal_and_starts(&hidden, Split::Train, 1, mix_seed(s, 2)) {
            Ok(x) => x,
            Err(e @ (Error::NoValidGoal | Error::EmptyBand)) => {
                last = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        let start = sample.starts[0].0;
        let labelled = label_instance(ProblemInstance::new(hidden.clone(), start, sample.goal)?)?;
        let image = render_image(&hidden, mix_seed(s, 3))?;
        let instance =
            ProblemInstance::new(image, start, sample.goal)?.with_gt_path(labelled.gt_path.expect("labelled"))?;
        return Ok(ImageSample { instance, hidden });
    }
    Err(last)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub id: u64,
    pub map_id: u64,
    pub split: Split,
    pub band: Band,
    pub instance: ProblemInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub map_id: u64,
    pub split: Split,
    pub seed: u64,
    /// Some band was sampled with replacement.
    pub with_replacement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// Indexed by map id. Image datasets hold the rendered images.
    pub maps: Vec<GridMap>,
    pub records: Vec<MapRecord>,
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

fn map_for(spec: &DatasetSpec, seed: u64) -> Result<GridMap> {
    match (spec.style, &spec.tile_source) {
        (ObstacleStyle::Tiled, Some(src)) => gen_tiled(src.style, spec.height, spec.width, seed),
        (style, _) => gen_map(style, spec.height, spec.width, seed),
    }
}

/// Generates every split. Map seeds derive from the dataset seed, the split,
/// and the map's position; maps identical to an earlier one are regenerated,
/// so no map appears twice.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut seen = BTreeSet::new();
    let mut ds = Dataset { spec: spec.clone(), maps: Vec::new(), records: Vec::new(), entries: Vec::new() };
    for (split, count) in [(Split::Train, spec.n_train), (Split::Val, spec.n_val), (Split::Test, spec.n_test)] {
        let per_band = match split {
            Split::Train => spec.starts_per_map.train,
            Split::Val => spec.starts_per_map.val,
            Split::Test => spec.starts_per_map.test,
        };
        for k in 0..count {
            let base = mix_seed(mix_seed(spec.seed, split.tag()), k as u64);
            generate_map(spec, split, per_band, base, &mut seen, &mut ds)
                .map_err(|e| Error::invalid(format!("{} map {k}: {e}", split.as_str())))?;
        }
    }
    Ok(ds)
}

fn generate_map(
    spec: &DatasetSpec,
    split: Split,
    per_band: usize,
    base: u64,
    seen: &mut BTreeSet<Vec<u8>>,
    ds: &mut Dataset,
) -> Result<()> {
    let map_id = ds.maps.len() as u64;
    let mut last = Error::NoValidGoal;
    for attempt in 0..MAX_MAP_ATTEMPTS {
        let seed = mix_seed(base, attempt);
        if spec.image_mode {
            let sample = gen_image_instance(spec.height, spec.width, seed)?;
            let key = sample.hidden.binary_cells().expect("binary").to_vec();
            if !seen.insert(key) {
                continue;
            }
            ds.maps.push(sample.instance.map.clone());
            ds.records.push(MapRecord { map_id, split, seed, with_replacement: false });
            let id = ds.entries.len() as u64;
            ds.entries.push(DatasetEntry { id, map_id, split, band: Band::None, instance: sample.instance });
            return Ok(());
        }
        let map = map_for(spec, mix_seed(seed, 1))?;
        let key = map.binary_cells().expect("binary").to_vec();
        if seen.contains(&key) {
            continue;
        }
        let sample = match sample_goal_and_starts(&map, split, per_band, mix_seed(seed, 2)) {
            Ok(s) => s,
            Err(e @ (Error::NoValidGoal | Error::EmptyBand)) => {
                last = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        seen.insert(key);
        for (start, band) in sample.starts {
            let inst = label_instance(ProblemInstance::new(map.clone(), start, sample.goal)?)?;
            let id = ds.entries.len() as u64;
            ds.entries.push(DatasetEntry { id, map_id, split, band, instance: inst });
        }
        ds.maps.push(map);
        ds.records.push(MapRecord { map_id, split, seed, with_replacement: sample.with_replacement });
        return Ok(());
    }
    Err(last)
}
