use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::level::{Placement, SpriteId, SpritePalette, TileGrid, CHUNK_WIDTH, LEVEL_HEIGHT};

use super::{Agent, AgentError, ProposeContext};

/// What a shape's position is measured from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeReference {
    /// The frame's left edge and top row.
    Frame,
    /// The nearest other shape in the frame, by index into the inventory.
    Shape(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub shape: usize,
    pub reference: ShapeReference,
    pub dx: i64,
    pub dy: i64,
    pub count: u64,
}

/// Inventory of connected same-class shapes and the joint distribution over
/// (shape, reference, offset) seen in training frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeModel {
    /// Cells of each shape relative to its bounding-box corner, sorted.
    pub shapes: Vec<Vec<(usize, usize, SpriteId)>>,
    pub frequencies: Vec<u64>,
    pub entries: Vec<ShapeEntry>,
    pub threshold: f64,
}

/// A connected component found in a frame, anchored at its bounding-box
/// top-left corner in level coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeInstance {
    pub anchor: (usize, usize),
    pub cells: Vec<(usize, usize, SpriteId)>,
}

/// 4-connected components of same-class sprites inside columns `[x0, x1)`,
/// in column-major discovery order.
pub fn extract_shapes(grid: &TileGrid, x0: usize, x1: usize, palette: &SpritePalette) -> Vec<ShapeInstance> {
    let x1 = x1.min(grid.width());
    let w = x1.saturating_sub(x0);
    let mut seen = vec![false; w * LEVEL_HEIGHT];
    let mut out = Vec::new();
    for sx in x0..x1 {
        for sy in 0..LEVEL_HEIGHT {
            let Some(start) = grid.get(sx, sy) else { continue };
            if seen[(sx - x0) * LEVEL_HEIGHT + sy] {
                continue;
            }
            let class = palette.class_of(start);
            let mut stack = vec![(sx, sy)];
            seen[(sx - x0) * LEVEL_HEIGHT + sy] = true;
            let mut cells = Vec::new();
            while let Some((x, y)) = stack.pop() {
                cells.push((x, y, grid.get(x, y).expect("occupied")));
                let nbrs = [(x as i64 - 1, y as i64), (x as i64 + 1, y as i64), (x as i64, y as i64 - 1), (x as i64, y as i64 + 1)];
                for (nx, ny) in nbrs {
                    if nx < x0 as i64 || nx >= x1 as i64 || ny < 0 || ny >= LEVEL_HEIGHT as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    let idx = (nx - x0) * LEVEL_HEIGHT + ny;
                    if seen[idx] {
                        continue;
                    }
                    if grid.get(nx, ny).is_some_and(|s| palette.class_of(s) == class) {
                        seen[idx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            let ax = cells.iter().map(|c| c.0).min().unwrap();
            let ay = cells.iter().map(|c| c.1).min().unwrap();
            let mut rel: Vec<_> = cells.into_iter().map(|(x, y, s)| (x - ax, y - ay, s)).collect();
            rel.sort();
            out.push(ShapeInstance { anchor: (ax, ay), cells: rel });
        }
    }
    out
}

fn manhattan(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Index of the instance nearest to `i` by anchor distance, earliest on ties.
fn nearest(instances: &[ShapeInstance], i: usize) -> Option<usize> {
    (0..instances.len()).filter(|&j| j != i).min_by_key(|&j| (manhattan(instances[i].anchor, instances[j].anchor), j))
}

fn frames(width: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..width.div_ceil(CHUNK_WIDTH)).map(move |f| (f * CHUNK_WIDTH, ((f + 1) * CHUNK_WIDTH).min(width)))
}

impl ShapeModel {
    pub const DEFAULT_THRESHOLD: f64 = 0.1;

    pub fn train(levels: &[TileGrid], palette: &SpritePalette) -> Self {
        let mut index: HashMap<Vec<(usize, usize, SpriteId)>, usize> = HashMap::new();
        let mut shapes = Vec::new();
        let mut frequencies = Vec::new();
        let mut counts: BTreeMap<(usize, ShapeReference, i64, i64), u64> = BTreeMap::new();
        for level in levels {
            for (x0, x1) in frames(level.width()) {
                let found = extract_shapes(level, x0, x1, palette);
                let ids: Vec<usize> = found
                    .iter()
                    .map(|inst| {
                        *index.entry(inst.cells.clone()).or_insert_with(|| {
                            shapes.push(inst.cells.clone());
                            frequencies.push(0);
                            shapes.len() - 1
                        })
                    })
                    .collect();
                for (i, inst) in found.iter().enumerate() {
                    frequencies[ids[i]] += 1;
                    let key = match nearest(&found, i) {
                        Some(j) => {
                            let r = found[j].anchor;
                            (ids[i], ShapeReference::Shape(ids[j]), inst.anchor.0 as i64 - r.0 as i64, inst.anchor.1 as i64 - r.1 as i64)
                        }
                        None => (ids[i], ShapeReference::Frame, (inst.anchor.0 - x0) as i64, inst.anchor.1 as i64),
                    };
                    *counts.entry(key).or_default() += 1;
                }
            }
        }
        let entries = counts
            .into_iter()
            .map(|((shape, reference, dx, dy), count)| ShapeEntry { shape, reference, dx, dy, count })
            .collect();
        ShapeModel { shapes, frequencies, entries, threshold: Self::DEFAULT_THRESHOLD }
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn probability(&self, entry: &ShapeEntry) -> f64 {
        entry.count as f64 / self.total() as f64
    }

    /// Best placement in one frame, if any clears the threshold.
    pub fn best_in_frame(
        &self,
        level: &TileGrid,
        x0: usize,
        x1: usize,
        palette: &SpritePalette,
    ) -> Option<(f64, Vec<Placement>)> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let present = extract_shapes(level, x0, x1, palette);
        let mut by_shape: HashMap<&[(usize, usize, SpriteId)], Vec<(usize, usize)>> = HashMap::new();
        for inst in &present {
            by_shape.entry(inst.cells.as_slice()).or_default().push(inst.anchor);
        }
        let mut best: Option<(f64, (usize, usize), usize)> = None;
        for e in &self.entries {
            let p = e.count as f64 / total as f64;
            if p < self.threshold {
                continue;
            }
            let bases: Vec<(i64, i64)> = match e.reference {
                ShapeReference::Frame => vec![(x0 as i64, 0)],
                ShapeReference::Shape(r) => by_shape
                    .get(self.shapes[r].as_slice())
                    .map(|v| v.iter().map(|&(x, y)| (x as i64, y as i64)).collect())
                    .unwrap_or_default(),
            };
            for (bx, by) in bases {
                let (ax, ay) = (bx + e.dx, by + e.dy);
                if ax < x0 as i64 || ay < 0 {
                    continue;
                }
                let anchor = (ax as usize, ay as usize);
                let better = match best {
                    None => true,
                    Some((bp, ba, _)) => p > bp || (p == bp && (anchor.0 < ba.0 || (anchor.0 == ba.0 && anchor.1 > ba.1))),
                };
                if better && self.fits(level, e.shape, anchor, x1, palette) {
                    best = Some((p, anchor, e.shape));
                }
            }
        }
        best.map(|(p, (ax, ay), s)| {
            (p, self.shapes[s].iter().map(|&(dx, dy, sp)| Placement::new(ax + dx, ay + dy, sp)).collect())
        })
    }

    fn fits(&self, level: &TileGrid, shape: usize, (ax, ay): (usize, usize), x1: usize, palette: &SpritePalette) -> bool {
        let cells = &self.shapes[shape];
        let inside = cells.iter().all(|&(dx, dy, _)| ax + dx < x1 && ay + dy < LEVEL_HEIGHT);
        if !inside || cells.iter().any(|&(dx, dy, _)| !level.is_empty_at(ax + dx, ay + dy)) {
            return false;
        }
        let mut after = level.clone();
        for &(dx, dy, s) in cells {
            after.place(ax + dx, ay + dy, s).expect("checked empty");
        }
        cells.iter().all(|&(dx, dy, s)| !(palette.is_flying(s) && after.supported(ax + dx, ay + dy)))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializes");
        v["kind"] = "shape".into();
        serde_json::to_string(&v).expect("serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| AgentError::Format(e.to_string()))?;
        if v.get("kind").and_then(|k| k.as_str()) != Some("shape") {
            return Err(AgentError::Format("not a shape table".into()));
        }
        let m: ShapeModel = serde_json::from_value(v).map_err(|e| AgentError::Format(e.to_string()))?;
        let bad_ref = |e: &ShapeEntry| matches!(e.reference, ShapeReference::Shape(r) if r >= m.shapes.len());
        if m.frequencies.len() != m.shapes.len() || m.entries.iter().any(|e| e.shape >= m.shapes.len() || bad_ref(e)) {
            return Err(AgentError::Format("shape table indices out of range".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        Ok(fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Clone)]
pub struct ShapeAgent {
    pub model: ShapeModel,
    palette: &'static SpritePalette,
}

impl ShapeAgent {
    pub fn new(model: ShapeModel) -> Self {
        ShapeAgent { model, palette: SpritePalette::standard() }
    }
}

impl Agent for ShapeAgent {
    fn name(&self) -> &str {
        "shape"
    }

    /// At most one shape per 40-column frame.
    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        let mut out = Vec::new();
        let mut level = ctx.level.clone();
        for (x0, x1) in frames(level.width()) {
            if let Some((_, cells)) = self.model.best_in_frame(&level, x0, x1, self.palette) {
                for p in &cells {
                    level.place(p.x, p.y, p.sprite)?;
                }
                out.extend(cells);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{GROUND, PIPE_LEFT, PIPE_RIGHT, PIPE_TOP_LEFT, PIPE_TOP_RIGHT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pal() -> &'static SpritePalette {
        SpritePalette::standard()
    }

    fn pipe(g: &mut TileGrid, x: usize) {
        g.place(x, 13, PIPE_TOP_LEFT).unwrap();
        g.place(x + 1, 13, PIPE_TOP_RIGHT).unwrap();
        g.place(x, 14, PIPE_LEFT).unwrap();
        g.place(x + 1, 14, PIPE_RIGHT).unwrap();
    }

    #[test]
    fn ground_run_is_one_shape() {
        let mut g = TileGrid::empty(10);
        for x in 2..5 {
            g.place(x, 14, GROUND).unwrap();
        }
        let m = ShapeModel::train(&[g], pal());
        assert_eq!(m.shapes, vec![vec![(0, 0, GROUND), (1, 0, GROUND), (2, 0, GROUND)]]);
        assert_eq!(m.frequencies, vec![1]);
    }

    #[test]
    fn pipe_offsets() {
        let mut g = TileGrid::empty(40);
        pipe(&mut g, 10);
        pipe(&mut g, 15);
        let m = ShapeModel::train(&[g], pal());
        assert_eq!(m.shapes.len(), 1);
        let dxs: Vec<i64> = m.entries.iter().map(|e| e.dx).collect();
        assert!(dxs.contains(&5) && dxs.contains(&-5), "{dxs:?}");
    }

    #[test]
    fn empty_levels_give_empty_inventory() {
        let m = ShapeModel::train(&[TileGrid::empty(50)], pal());
        assert!(m.shapes.is_empty() && m.entries.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let level = TileGrid::empty(40);
        assert!(ShapeAgent::new(m).propose(&mut ProposeContext::chunk(&level, &mut rng)).unwrap().is_empty());
    }

    #[test]
    fn known_shape_in_known_spot_blocks_then_empty_frame_gets_it() {
        let mut g = TileGrid::empty(40);
        pipe(&mut g, 7);
        let m = ShapeModel::train(&[g.clone()], pal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = ShapeAgent::new(m);
        assert!(agent.propose(&mut ProposeContext::chunk(&g, &mut rng)).unwrap().is_empty());
        let empty = TileGrid::empty(40);
        let out = agent.propose(&mut ProposeContext::chunk(&empty, &mut rng)).unwrap();
        let mut expect = TileGrid::empty(40);
        for p in &out {
            expect.place(p.x, p.y, p.sprite).unwrap();
        }
        assert_eq!(expect, g);
    }

    #[test]
    fn below_threshold_adds_nothing() {
        let mut g = TileGrid::empty(40);
        for x in (0..40).step_by(4) {
            g.place(x, 14, GROUND).unwrap();
        }
        let mut strict = ShapeModel::train(&[g], pal());
        strict.threshold = 1.1;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let level = TileGrid::empty(40);
        assert!(ShapeAgent::new(strict).propose(&mut ProposeContext::chunk(&level, &mut rng)).unwrap().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let mut g = TileGrid::empty(40);
        pipe(&mut g, 3);
        pipe(&mut g, 20);
        let m = ShapeModel::train(&[g], pal());
        assert_eq!(ShapeModel::from_json(&m.to_json()).unwrap(), m);
    }
}
