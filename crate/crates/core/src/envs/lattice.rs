//! Desk-scale state-lattice navigation around a walled ring track.
//!
//! The XY grid holds an outer corridor around an inner wall block. Each
//! corridor cross-section is grass, then track, then grass. The robot moves
//! with precomputed motion primitives between `(x, y, heading)` lattice
//! states. A lap runs from a checkpoint on the left side of the ring to a
//! checkpoint region on the right side.
//!
//! Icy patches span the corridor cross-section on the top or bottom
//! straight. The model knows nothing about them. Under the true dynamics a
//! primitive entering a patch ends at the first icy cell it touches,
//! shifted by the patch drift, with the heading unchanged. On ice only the
//! gentlest straight primitives keep traction: they slide by the drift,
//! while every other primitive spins in place. A patch whose drift points
//! against the direction of travel cannot be crossed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::primitives::{PrimitiveParams, PrimitiveTable};
use super::{validate, EnvError};
use crate::approx::FeatureMap;
use crate::problem::{dijkstra_optimal_values, ActionId, Environment, Problem, StateId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatticeParams {
    pub width: usize,
    pub height: usize,
    /// Corridor width, grass margins included.
    pub corridor: usize,
    /// Grass margin on either side of the track.
    pub margin: usize,
    pub patches: usize,
    /// Patch extent along the corridor.
    pub patch_length: usize,
    /// Magnitude of the along-corridor drift of each patch.
    pub patch_drift: i32,
    /// Half extent of the goal checkpoint along the corridor.
    pub checkpoint_half_span: usize,
    pub track_cost: f64,
    pub off_track_cost: f64,
    pub primitives: PrimitiveParams,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            corridor: 8,
            margin: 1,
            patches: 3,
            patch_length: 8,
            patch_drift: 6,
            checkpoint_half_span: 2,
            track_cost: 1.0,
            off_track_cost: 100.0,
            primitives: PrimitiveParams::default(),
        }
    }
}

impl LatticeParams {
    pub fn paper_scale() -> Self {
        Self {
            width: 100,
            height: 100,
            corridor: 16,
            margin: 2,
            patches: 5,
            patch_length: 16,
            patch_drift: 12,
            checkpoint_half_span: 4,
            primitives: PrimitiveParams::paper_scale(),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::BadParam(m.to_string()));
        if self.corridor < 2 * self.margin + 1 {
            return bad("corridor too narrow for a track between its margins");
        }
        if self.width < 2 * self.corridor + self.patch_length + 1
            || self.height < 2 * self.corridor + 2 * self.checkpoint_half_span + 1
        {
            return bad("grid too small for the corridor layout");
        }
        if self.patch_length == 0 || self.patch_drift <= 0 {
            return bad("patch length and drift must be positive");
        }
        if self.patch_drift as usize >= self.patch_length {
            return bad("patch drift must be shorter than the patch");
        }
        if !(self.track_cost > 0.0 && self.off_track_cost >= self.track_cost) {
            return bad("costs must satisfy 0 < track_cost <= off_track_cost");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Track,
    Grass,
    Wall,
}

/// Axis-aligned block of icy cells `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
    pub drift: (i32, i32),
}

impl Patch {
    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[derive(Clone, Debug)]
pub struct LatticeWorld {
    params: LatticeParams,
    table: PrimitiveTable,
    patches: Vec<Patch>,
    cells: Vec<Cell>,
    /// Dense index of each non-wall cell, `u32::MAX` for walls.
    cell_index: Vec<u32>,
    free_cells: Vec<(i32, i32)>,
    headings: usize,
    actions: usize,
    goal: Vec<bool>,
    start: StateId,
    model_next: Vec<u32>,
    true_next: Vec<u32>,
    raw_cost: Vec<f64>,
    cost_scale: f64,
    model_values: Vec<f64>,
}

const MAX_ATTEMPTS: usize = 200;

impl LatticeWorld {
    /// Random patch placement, resampled until every state reaches the
    /// goal under the true dynamics.
    pub fn generate<R: Rng>(params: &LatticeParams, rng: &mut R) -> Result<Self, EnvError> {
        let table = PrimitiveTable::generate(&params.primitives)?;
        Self::generate_with_table(params, table, rng)
    }

    pub fn generate_with_table<R: Rng>(
        params: &LatticeParams,
        table: PrimitiveTable,
        rng: &mut R,
    ) -> Result<Self, EnvError> {
        params.validate()?;
        for _ in 0..MAX_ATTEMPTS {
            let Some(patches) = sample_patches(params, rng) else {
                continue;
            };
            match Self::with_patches(params, table.clone(), patches) {
                Ok(w) => return Ok(w),
                Err(EnvError::DeadEnd(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(EnvError::GenerationFailed(MAX_ATTEMPTS))
    }

    pub fn with_patches(
        params: &LatticeParams,
        table: PrimitiveTable,
        patches: Vec<Patch>,
    ) -> Result<Self, EnvError> {
        params.validate()?;
        if table.params() != &params.primitives {
            return Err(EnvError::BadParam(
                "primitive table was generated from other parameters".into(),
            ));
        }
        let (w, h) = (params.width as i32, params.height as i32);
        let mut cells = Vec::with_capacity(params.width * params.height);
        for y in 0..h {
            for x in 0..w {
                cells.push(classify(params, x, y));
            }
        }
        let mut cell_index = vec![u32::MAX; cells.len()];
        let mut free_cells = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            if *c != Cell::Wall {
                cell_index[i] = free_cells.len() as u32;
                free_cells.push(((i % params.width) as i32, (i / params.width) as i32));
            }
        }
        let headings = table.headings();
        let actions = table.num_actions();
        let mut world = Self {
            params: params.clone(),
            table,
            patches,
            cells,
            cell_index,
            free_cells,
            headings,
            actions,
            goal: Vec::new(),
            start: StateId(0),
            model_next: Vec::new(),
            true_next: Vec::new(),
            raw_cost: Vec::new(),
            cost_scale: 1.0,
            model_values: Vec::new(),
        };
        let c = params.corridor as i32;
        let mid = h / 2;
        let span = params.checkpoint_half_span as i32;
        world.goal = (0..world.n_states())
            .map(|s| {
                let (x, y, _) = world.decode(StateId::from(s));
                x >= w - c && (y - mid).abs() <= span && world.cell(x, y) == Cell::Track
            })
            .collect();
        world.start = world
            .state_of(c / 2, mid, headings / 4)
            .ok_or_else(|| EnvError::BadParam("start checkpoint is not free".into()))?;
        world.cost_scale = params.off_track_cost * world.table.max_swept_cells() as f64;
        world.build_tables();
        validate(&world, world.goal.iter().any(|&g| g))?;
        world.model_values = dijkstra_optimal_values(&world, |s, a| world.model_step(s, a));
        Ok(world)
    }

    fn build_tables(&mut self) {
        let n = self.n_states() * self.actions;
        let mut model_next = Vec::with_capacity(n);
        let mut true_next = Vec::with_capacity(n);
        let mut raw_cost = Vec::with_capacity(n);
        let gentle: Vec<usize> = (0..self.headings)
            .map(|h| {
                self.table
                    .for_heading(h)
                    .iter()
                    .filter(|p| p.dtheta == 0)
                    .map(|p| p.duration())
                    .min()
                    .unwrap_or(0)
            })
            .collect();
        for s in 0..self.n_states() {
            let (x, y, th) = self.decode(StateId::from(s));
            for a in 0..self.actions {
                match self.table.get(th, a) {
                    None => {
                        model_next.push(s as u32);
                        true_next.push(s as u32);
                        raw_cost.push(self.cost_scale);
                    }
                    Some(p) => {
                        let traction = p.dtheta == 0 && p.duration() <= gentle[th];
                        let (m, cost) = self.sweep(x, y, th, &p.cells, p.dtheta as usize, None);
                        let (t, _) =
                            self.sweep(x, y, th, &p.cells, p.dtheta as usize, Some(traction));
                        model_next.push(m.0);
                        true_next.push(t.0);
                        raw_cost.push(cost);
                    }
                }
            }
        }
        self.model_next = model_next;
        self.true_next = true_next;
        self.raw_cost = raw_cost;
    }

    /// Follows a swept cell list from `(x, y, th)`. Stops before the first
    /// wall or off-grid cell, which is charged at the off-track cost. With
    /// `icy = Some(traction)` patches apply: contact ends the motion at the
    /// shifted contact cell, and from an icy start cell the robot slides if
    /// it has traction and otherwise stays put.
    fn sweep(
        &self,
        x: i32,
        y: i32,
        th: usize,
        cells: &[(i32, i32)],
        dtheta: usize,
        icy: Option<bool>,
    ) -> (StateId, f64) {
        if let Some(traction) = icy {
            if let Some(p) = self.patch_at(x, y) {
                let s = if traction {
                    self.slide(x, y, th, p.drift)
                } else {
                    self.state_of(x, y, th).expect("free cell")
                };
                return (s, 0.0);
            }
        }
        let mut cost = 0.0;
        let (mut cx, mut cy) = (x, y);
        for &(dx, dy) in cells {
            let (nx, ny) = (x + dx, y + dy);
            match self.cell(nx, ny) {
                Cell::Wall => {
                    cost += self.params.off_track_cost;
                    return (self.state_of(cx, cy, th).expect("free cell"), cost);
                }
                Cell::Track => cost += self.params.track_cost,
                Cell::Grass => cost += self.params.off_track_cost,
            }
            if icy.is_some() {
                if let Some(p) = self.patch_at(nx, ny) {
                    return (self.slide(nx, ny, th, p.drift), cost);
                }
            }
            (cx, cy) = (nx, ny);
        }
        let end = (th + dtheta) % self.headings;
        (self.state_of(cx, cy, end).expect("free cell"), cost)
    }

    /// Unit steps along `drift`, stopping before walls.
    fn slide(&self, x: i32, y: i32, th: usize, drift: (i32, i32)) -> StateId {
        let (mut cx, mut cy) = (x, y);
        let steps = drift.0.abs().max(drift.1.abs());
        for _ in 0..steps {
            let nx = cx + drift.0.signum();
            let ny = cy + drift.1.signum();
            if self.cell(nx, ny) == Cell::Wall {
                break;
            }
            (cx, cy) = (nx, ny);
        }
        self.state_of(cx, cy, th).expect("free cell")
    }

    fn n_states(&self) -> usize {
        self.free_cells.len() * self.headings
    }

    fn patch_at(&self, x: i32, y: i32) -> Option<&Patch> {
        self.patches.iter().find(|p| p.contains(x, y))
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn table(&self) -> &PrimitiveTable {
        &self.table
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn is_icy(&self, x: i32, y: i32) -> bool {
        self.patch_at(x, y).is_some()
    }

    /// Off-grid cells read as walls.
    pub fn cell(&self, x: i32, y: i32) -> Cell {
        if x < 0 || y < 0 || x >= self.params.width as i32 || y >= self.params.height as i32 {
            return Cell::Wall;
        }
        self.cells[y as usize * self.params.width + x as usize]
    }

    pub fn state_of(&self, x: i32, y: i32, heading: usize) -> Option<StateId> {
        if self.cell(x, y) == Cell::Wall || heading >= self.headings {
            return None;
        }
        let i = self.cell_index[y as usize * self.params.width + x as usize] as usize;
        Some(StateId::from(i * self.headings + heading))
    }

    pub fn decode(&self, s: StateId) -> (i32, i32, usize) {
        let (x, y) = self.free_cells[s.index() / self.headings];
        (x, y, s.index() % self.headings)
    }

    /// Unscaled cost: the sum of the cell cost map over the swept cells.
    pub fn raw_cost(&self, s: StateId, a: ActionId) -> f64 {
        self.raw_cost[s.index() * self.actions + a.index()]
    }

    /// Divisor mapping raw costs into `(0, 1]`.
    pub fn cost_scale(&self) -> f64 {
        self.cost_scale
    }

    /// Optimal cost-to-goal under the model, the usual initial `V`.
    pub fn model_values(&self) -> &[f64] {
        &self.model_values
    }
}

fn classify(params: &LatticeParams, x: i32, y: i32) -> Cell {
    let (w, h) = (params.width as i32, params.height as i32);
    let c = params.corridor as i32;
    let m = params.margin as i32;
    let to_inner = (c - x)
        .max(x - (w - 1 - c))
        .max((c - y).max(y - (h - 1 - c)));
    if to_inner <= 0 {
        return Cell::Wall;
    }
    let to_outer = x.min(y).min(w - 1 - x).min(h - 1 - y);
    if to_outer >= m && to_inner > m {
        Cell::Track
    } else {
        Cell::Grass
    }
}

/// Patches on the top or bottom straight, kept apart along the corridor.
/// Ice on the top straight drifts west and ice on the bottom straight drifts
/// east, so the top route is closed to eastbound travel. The first two
/// patches go one on each straight.
fn sample_patches<R: Rng>(params: &LatticeParams, rng: &mut R) -> Option<Vec<Patch>> {
    let (w, h) = (params.width as i32, params.height as i32);
    let c = params.corridor as i32;
    let len = params.patch_length as i32;
    let mut out: Vec<Patch> = Vec::new();
    for i in 0..params.patches {
        let mut placed = false;
        for _ in 0..50 {
            let top = if i < 2 { i == 0 } else { rng.gen_bool(0.5) };
            let x0 = rng.gen_range(c..=w - c - len);
            let (y0, y1) = if top { (h - c, h) } else { (0, c) };
            let sign = if top { -1 } else { 1 };
            let p = Patch {
                x0,
                y0,
                x1: x0 + len,
                y1,
                drift: (sign * params.patch_drift, 0),
            };
            let clear = out
                .iter()
                .all(|q| q.y0 != p.y0 || (q.x0 - p.x0).abs() >= 2 * len + params.patch_drift);
            if clear {
                out.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(out)
}

impl Problem for LatticeWorld {
    fn num_states(&self) -> usize {
        self.n_states()
    }
    fn num_actions(&self) -> usize {
        self.actions
    }
    fn is_goal(&self, s: StateId) -> bool {
        self.goal[s.index()]
    }
    fn model_step(&self, s: StateId, a: ActionId) -> StateId {
        StateId(self.model_next[s.index() * self.actions + a.index()])
    }
    fn cost(&self, s: StateId, a: ActionId) -> f64 {
        self.raw_cost(s, a) / self.cost_scale
    }
}

impl Environment for LatticeWorld {
    fn true_step(&self, s: StateId, a: ActionId) -> StateId {
        StateId(self.true_next[s.index() * self.actions + a.index()])
    }
    fn start(&self) -> StateId {
        self.start
    }
    fn coordinates(&self, s: StateId) -> Vec<f64> {
        let (x, y, th) = self.decode(s);
        vec![x as f64, y as f64, th as f64]
    }
}

/// Normalized position and heading direction; base is the model value.
impl FeatureMap for LatticeWorld {
    fn dim(&self) -> usize {
        5
    }
    fn num_states(&self) -> usize {
        self.n_states()
    }
    fn features(&self, s: StateId) -> Vec<f64> {
        let (x, y, th) = self.decode(s);
        let ang = std::f64::consts::TAU * th as f64 / self.headings as f64;
        vec![
            1.0,
            x as f64 / self.params.width as f64,
            y as f64 / self.params.height as f64,
            ang.cos(),
            ang.sin(),
        ]
    }
    fn base_value(&self, s: StateId) -> f64 {
        self.model_values[s.index()]
    }
}
