use rand::seq::SliceRandom;
use rand::Rng;

use super::{validate, EnvError};
use crate::approx::FeatureMap;
use crate::problem::{ActionId, Environment, Problem, StateId};

/// 4-connected moves, in action-id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Right = 0,
    Up = 1,
    Left = 2,
    Down = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Right,
        GridAction::Up,
        GridAction::Left,
        GridAction::Down,
    ];

    // y grows downward, matching map text rows.
    pub fn offset(self) -> (i32, i32) {
        match self {
            GridAction::Right => (1, 0),
            GridAction::Up => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Down => (0, 1),
        }
    }

    pub fn id(self) -> ActionId {
        ActionId(self as u16)
    }
}

/// Grid navigation where icy cells make the robot slide.
///
/// States are the free cells. The model moves nominally and stays put when
/// blocked. On an icy cell the true dynamics ignore the action and apply the
/// cell's fixed drift instead.
#[derive(Clone, Debug)]
pub struct GridNavIce {
    width: usize,
    height: usize,
    /// Free cells in row-major order; index is the state id.
    cells: Vec<(i32, i32)>,
    /// Grid position -> state id.
    id_of: Vec<Option<u32>>,
    drift: Vec<Option<(i32, i32)>>,
    goal: Vec<bool>,
    start: StateId,
    step_cost: f64,
    optimistic: bool,
}

impl GridNavIce {
    /// Parses an ASCII map. `.` free, `#` obstacle, `S` start, `G` goal, and
    /// `>` `^` `<` `v` icy cells drifting right, up, left, down.
    pub fn from_ascii(map: &str) -> Result<Self, EnvError> {
        let rows: Vec<&str> = map
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 || rows.iter().any(|r| r.chars().count() != width) {
            return Err(EnvError::BadMap(
                "rows must be non-empty and equal length".into(),
            ));
        }
        let mut free = vec![false; width * height];
        let mut drift = vec![None; width * height];
        let mut goals = Vec::new();
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.chars().enumerate() {
                let i = y * width + x;
                free[i] = ch != '#';
                match ch {
                    '.' | '#' => {}
                    'S' => start = Some((x as i32, y as i32)),
                    'G' => goals.push((x as i32, y as i32)),
                    '>' => drift[i] = Some((1, 0)),
                    '^' => drift[i] = Some((0, -1)),
                    '<' => drift[i] = Some((-1, 0)),
                    'v' => drift[i] = Some((0, 1)),
                    other => return Err(EnvError::BadMap(format!("unknown cell '{other}'"))),
                }
            }
        }
        let start = start.ok_or_else(|| EnvError::BadMap("no start cell".into()))?;
        Self::assemble(width, height, &free, &drift, &goals, start, 1.0, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        width: usize,
        height: usize,
        free: &[bool],
        drift: &[Option<(i32, i32)>],
        goals: &[(i32, i32)],
        start: (i32, i32),
        step_cost: f64,
        optimistic: bool,
    ) -> Result<Self, EnvError> {
        if !(step_cost > 0.0 && step_cost <= 1.0) {
            return Err(EnvError::BadParam(format!(
                "step cost {step_cost} outside (0, 1]"
            )));
        }
        let mut cells = Vec::new();
        let mut id_of = vec![None; width * height];
        let mut cell_drift = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if free[i] {
                    id_of[i] = Some(cells.len() as u32);
                    cells.push((x as i32, y as i32));
                    cell_drift.push(drift[i]);
                }
            }
        }
        let lookup = |(x, y): (i32, i32)| -> Result<StateId, EnvError> {
            if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
                return Err(EnvError::BadMap(format!("cell ({x}, {y}) off the grid")));
            }
            id_of[y as usize * width + x as usize]
                .map(StateId)
                .ok_or_else(|| EnvError::BadMap(format!("cell ({x}, {y}) is an obstacle")))
        };
        let mut goal = vec![false; cells.len()];
        for &g in goals {
            goal[lookup(g)?.index()] = true;
        }
        let start = lookup(start)?;
        let env = Self {
            width,
            height,
            cells,
            id_of,
            drift: cell_drift,
            goal,
            start,
            step_cost,
            optimistic,
        };
        validate(&env, !goals.is_empty())?;
        Ok(env)
    }

    /// Rebuilds with a different per-step cost.
    pub fn with_step_cost(self, step_cost: f64) -> Result<Self, EnvError> {
        let (free, drift, goals, start) = self.layout();
        Self::assemble(
            self.width,
            self.height,
            &free,
            &drift,
            &goals,
            start,
            step_cost,
            self.optimistic,
        )
    }

    /// Marks the model as optimistic; construction fails if it is not.
    pub fn claiming_optimistic_model(self) -> Result<Self, EnvError> {
        let (free, drift, goals, start) = self.layout();
        Self::assemble(
            self.width,
            self.height,
            &free,
            &drift,
            &goals,
            start,
            self.step_cost,
            true,
        )
    }

    /// Same layout with every icy cell removed.
    pub fn without_ice(&self) -> Self {
        let mut env = self.clone();
        env.drift.iter_mut().for_each(|d| *d = None);
        env
    }

    #[allow(clippy::type_complexity)]
    fn layout(
        &self,
    ) -> (
        Vec<bool>,
        Vec<Option<(i32, i32)>>,
        Vec<(i32, i32)>,
        (i32, i32),
    ) {
        let mut free = vec![false; self.width * self.height];
        let mut drift = vec![None; self.width * self.height];
        let mut goals = Vec::new();
        for (i, &(x, y)) in self.cells.iter().enumerate() {
            let k = y as usize * self.width + x as usize;
            free[k] = true;
            drift[k] = self.drift[i];
            if self.goal[i] {
                goals.push((x, y));
            }
        }
        (free, drift, goals, self.cells[self.start.index()])
    }

    /// Random obstacles at the given density, no ice. Free cells that cannot
    /// reach the goal are filled in.
    pub fn random_obstacles<R: Rng>(
        width: usize,
        height: usize,
        density: f64,
        rng: &mut R,
    ) -> Result<Self, EnvError> {
        for _ in 0..100 {
            let mut free: Vec<bool> = (0..width * height)
                .map(|_| rng.gen::<f64>() >= density)
                .collect();
            let candidates: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
            let Some(&g) = candidates.choose(rng) else {
                continue;
            };
            let reach = connected_to(width, height, &free, g);
            for (f, r) in free.iter_mut().zip(&reach) {
                *f &= *r;
            }
            let pool: Vec<usize> = (0..free.len()).filter(|&i| free[i] && i != g).collect();
            if pool.len() < (width * height) / 4 {
                continue;
            }
            let s = *pool.choose(rng).expect("pool is non-empty");
            let pos = |i: usize| ((i % width) as i32, (i / width) as i32);
            let drift = vec![None; width * height];
            return Self::assemble(width, height, &free, &drift, &[pos(g)], pos(s), 1.0, false);
        }
        Err(EnvError::GenerationFailed(100))
    }

    /// A `size x size` room split by a vertical wall with a few gaps, start on
    /// the left, goal on the right, and icy cells near the wall drifting by one
    /// cell. Instances are resampled until the model is verified optimistic.
    pub fn bottleneck<R: Rng>(size: usize, rng: &mut R) -> Result<Self, EnvError> {
        if size < 6 {
            return Err(EnvError::BadParam("bottleneck grid needs size >= 6".into()));
        }
        const ATTEMPTS: usize = 200;
        let wall = (size / 2) as i32;
        for _ in 0..ATTEMPTS {
            let mut free = vec![true; size * size];
            let mut drift = vec![None; size * size];
            let mut rows: Vec<usize> = (0..size).collect();
            rows.shuffle(rng);
            let gaps = &rows[..2 + rng.gen_range(0..2)];
            for y in 0..size {
                if !gaps.contains(&y) {
                    free[y * size + wall as usize] = false;
                }
            }
            // Ice around the gaps, plus a few stray patches.
            let dirs = [(1, 0), (0, -1), (-1, 0), (0, 1)];
            let mut icy = 0;
            for &gy in gaps {
                for dx in -1..=1 {
                    let x = wall + dx;
                    let i = gy * size + x as usize;
                    if free[i] && rng.gen_bool(0.6) {
                        drift[i] = Some(dirs[rng.gen_range(0..4)]);
                        icy += 1;
                    }
                }
            }
            for _ in 0..size / 2 {
                let i = rng.gen_range(0..size * size);
                if free[i] {
                    drift[i] = Some(dirs[rng.gen_range(0..4)]);
                    icy += 1;
                }
            }
            if icy == 0 {
                continue;
            }
            let start = (rng.gen_range(0..wall), rng.gen_range(0..size as i32));
            let goal = (
                rng.gen_range(wall + 1..size as i32),
                rng.gen_range(0..size as i32),
            );
            let si = start.1 as usize * size + start.0 as usize;
            let gi = goal.1 as usize * size + goal.0 as usize;
            drift[si] = None;
            drift[gi] = None;
            match Self::assemble(size, size, &free, &drift, &[goal], start, 1.0, true) {
                Ok(env) => return Ok(env),
                Err(EnvError::DeadEnd(_)) | Err(EnvError::NotOptimistic(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(EnvError::GenerationFailed(ATTEMPTS))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, s: StateId) -> (i32, i32) {
        self.cells[s.index()]
    }

    pub fn state_at(&self, x: i32, y: i32) -> Option<StateId> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        self.id_of[y as usize * self.width + x as usize].map(StateId)
    }

    pub fn is_icy(&self, s: StateId) -> bool {
        self.drift[s.index()].is_some()
    }

    fn shift(&self, s: StateId, (dx, dy): (i32, i32)) -> StateId {
        let (x, y) = self.cells[s.index()];
        self.state_at(x + dx, y + dy).unwrap_or(s)
    }

    fn nearest_goal_distance(&self, s: StateId) -> f64 {
        let (x, y) = self.cells[s.index()];
        self.cells
            .iter()
            .zip(&self.goal)
            .filter(|(_, g)| **g)
            .map(|(&(gx, gy), _)| ((gx - x).abs() + (gy - y).abs()) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

impl Problem for GridNavIce {
    fn num_states(&self) -> usize {
        self.cells.len()
    }
    fn num_actions(&self) -> usize {
        4
    }
    fn is_goal(&self, s: StateId) -> bool {
        self.goal[s.index()]
    }
    fn model_step(&self, s: StateId, a: ActionId) -> StateId {
        self.shift(s, GridAction::ALL[a.index()].offset())
    }
    fn cost(&self, _: StateId, _: ActionId) -> f64 {
        self.step_cost
    }
}

impl Environment for GridNavIce {
    fn true_step(&self, s: StateId, a: ActionId) -> StateId {
        match self.drift[s.index()] {
            Some(d) => self.shift(s, d),
            None => self.model_step(s, a),
        }
    }
    fn start(&self) -> StateId {
        self.start
    }
    fn coordinates(&self, s: StateId) -> Vec<f64> {
        let (x, y) = self.cells[s.index()];
        vec![x as f64, y as f64]
    }
    fn claims_optimistic_model(&self) -> bool {
        self.optimistic
    }
}

/// Normalized position and offset to the nearest goal; base is manhattan
/// distance to the nearest goal times the step cost.
impl FeatureMap for GridNavIce {
    fn dim(&self) -> usize {
        5
    }
    fn num_states(&self) -> usize {
        self.cells.len()
    }
    fn features(&self, s: StateId) -> Vec<f64> {
        let (x, y) = self.cells[s.index()];
        let (w, h) = (self.width as f64, self.height as f64);
        let (gx, gy) = self
            .cells
            .iter()
            .zip(&self.goal)
            .filter(|(_, g)| **g)
            .map(|(c, _)| *c)
            .min_by_key(|&(gx, gy)| (gx - x).abs() + (gy - y).abs())
            .unwrap_or((x, y));
        vec![
            1.0,
            x as f64 / w,
            y as f64 / h,
            (gx - x) as f64 / w,
            (gy - y) as f64 / h,
        ]
    }
    fn base_value(&self, s: StateId) -> f64 {
        self.nearest_goal_distance(s) * self.step_cost
    }
}

fn connected_to(width: usize, height: usize, free: &[bool], from: usize) -> Vec<bool> {
    let mut seen = vec![false; free.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % width) as i32, (i / width) as i32);
        for (dx, dy) in [(1, 0), (0, -1), (-1, 0), (0, 1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx as usize >= width || ny as usize >= height {
                continue;
            }
            let j = ny as usize * width + nx as usize;
            if free[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}
