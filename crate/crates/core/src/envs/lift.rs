use rand::seq::SliceRandom;
use rand::Rng;

use super::{validate, EnvError};
use crate::approx::FeatureMap;
use crate::problem::{ActionId, Environment, Problem, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftAction {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

impl LiftAction {
    pub const ALL: [LiftAction; 4] = [
        LiftAction::Left,
        LiftAction::Right,
        LiftAction::Up,
        LiftAction::Down,
    ];

    pub fn id(self) -> ActionId {
        ActionId(self as u16)
    }
}

/// Carrying a heavy object on a `(column, height)` grid.
///
/// The model treats the object as light: `Up` lifts by [`LiftGrid::LIFT`]
/// heights everywhere. In reality a lift whose span touches the heavy band
/// fails outright in ordinary columns and only reaches an intermediate height
/// (one cell) in strong columns. The goal shelf sits above the band, so every
/// path to it crosses an incorrectly modeled lift, while the model only ever
/// overestimates how far the object moves.
#[derive(Clone, Debug)]
pub struct LiftGrid {
    columns: usize,
    heights: usize,
    /// Heights `band.0 .. band.1` are heavy.
    band: (usize, usize),
    strong: Vec<bool>,
    blocked: Vec<bool>,
    /// Goal: height >= `goal_height` within columns `goal_columns.0 ..= goal_columns.1`.
    goal_height: usize,
    goal_columns: (usize, usize),
    start: StateId,
}

impl LiftGrid {
    pub const LIFT: usize = 2;

    pub fn new(
        columns: usize,
        heights: usize,
        band: (usize, usize),
        strong_columns: &[usize],
        goal_height: usize,
        goal_columns: (usize, usize),
        start: (usize, usize),
    ) -> Result<Self, EnvError> {
        Self::with_obstacles(
            columns,
            heights,
            band,
            strong_columns,
            goal_height,
            goal_columns,
            start,
            &[],
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_obstacles(
        columns: usize,
        heights: usize,
        band: (usize, usize),
        strong_columns: &[usize],
        goal_height: usize,
        goal_columns: (usize, usize),
        start: (usize, usize),
        obstacles: &[(usize, usize)],
    ) -> Result<Self, EnvError> {
        if band.0 == 0 || band.0 >= band.1 || band.1 > goal_height || goal_height >= heights {
            return Err(EnvError::BadParam(format!(
                "need 0 < band start < band end <= goal height < {heights}"
            )));
        }
        if goal_columns.0 > goal_columns.1 || goal_columns.1 >= columns {
            return Err(EnvError::BadParam("goal columns out of range".into()));
        }
        if start.0 >= columns || start.1 >= heights {
            return Err(EnvError::BadParam("start off the grid".into()));
        }
        let mut strong = vec![false; columns];
        for &c in strong_columns {
            *strong
                .get_mut(c)
                .ok_or_else(|| EnvError::BadParam(format!("strong column {c} off the grid")))? =
                true;
        }
        let mut blocked = vec![false; columns * heights];
        for &(c, h) in obstacles {
            if c >= columns || h >= heights || (c, h) == start {
                return Err(EnvError::BadParam(format!("bad obstacle ({c}, {h})")));
            }
            blocked[h * columns + c] = true;
        }
        let env = Self {
            columns,
            heights,
            band,
            strong,
            blocked,
            goal_height,
            goal_columns,
            start: StateId((start.1 * columns + start.0) as u32),
        };
        validate(&env, true)?;
        Ok(env)
    }

    /// Seeded instance: random start column on the floor, random strong
    /// columns at least three columns from the start and the goal, and a
    /// small random obstacle below the band.
    pub fn random<R: Rng>(columns: usize, heights: usize, rng: &mut R) -> Result<Self, EnvError> {
        if columns < 4 || heights < 8 {
            return Err(EnvError::BadParam(
                "lift grid needs at least 4 x 8 cells".into(),
            ));
        }
        const ATTEMPTS: usize = 100;
        let band_lo = heights / 2 - 1;
        let band = (band_lo, band_lo + heights / 4);
        let goal_height = heights - 2;
        for _ in 0..ATTEMPTS {
            let goal_lo = rng.gen_range(0..columns - 1);
            let goal_columns = (goal_lo, goal_lo + 1);
            let start = (rng.gen_range(0..columns), 0);
            // Strong columns sit away from both the start and the goal.
            let far = |c: usize, lo: usize, hi: usize| c + 3 <= lo || c >= hi + 3;
            let mut cols: Vec<usize> = (0..columns)
                .filter(|&c| far(c, start.0, start.0) && far(c, goal_columns.0, goal_columns.1))
                .collect();
            let wanted = 1 + columns / 8;
            if cols.len() < wanted {
                continue;
            }
            cols.shuffle(rng);
            let strong = &cols[..wanted];
            let obstacle = (rng.gen_range(0..columns), rng.gen_range(1..band.0));
            let obstacles: Vec<_> = [obstacle, (obstacle.0, obstacle.1 + 1)]
                .into_iter()
                .filter(|&(c, h)| h < band.0 && !strong.contains(&c))
                .collect();
            match Self::with_obstacles(
                columns,
                heights,
                band,
                strong,
                goal_height,
                goal_columns,
                start,
                &obstacles,
            ) {
                Ok(env) => return Ok(env),
                Err(EnvError::DeadEnd(_)) | Err(EnvError::NotOptimistic(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(EnvError::GenerationFailed(ATTEMPTS))
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn heights(&self) -> usize {
        self.heights
    }

    pub fn band(&self) -> (usize, usize) {
        self.band
    }

    pub fn is_strong(&self, column: usize) -> bool {
        self.strong[column]
    }

    pub fn position(&self, s: StateId) -> (usize, usize) {
        (s.index() % self.columns, s.index() / self.columns)
    }

    pub fn state_at(&self, column: usize, height: usize) -> StateId {
        StateId((height * self.columns + column) as u32)
    }

    fn free(&self, c: usize, h: usize) -> bool {
        !self.blocked[h * self.columns + c]
    }

    fn lift_touches_band(&self, h: usize) -> bool {
        let top = (h + Self::LIFT).min(self.heights - 1);
        (h + 1..=top).any(|k| k >= self.band.0 && k < self.band.1)
    }

    fn moved(&self, s: StateId, a: LiftAction, lift: usize) -> StateId {
        let (c, h) = self.position(s);
        let (nc, nh) = match a {
            LiftAction::Left => (c.wrapping_sub(1), h),
            LiftAction::Right => (c + 1, h),
            LiftAction::Up => (c, (h + lift).min(self.heights - 1)),
            LiftAction::Down => (c, h.wrapping_sub(1)),
        };
        if nc >= self.columns || nh >= self.heights {
            return s;
        }
        if a == LiftAction::Up {
            // The object stops below the first obstacle on its way up.
            let mut reached = h;
            for k in h + 1..=nh {
                if !self.free(c, k) {
                    break;
                }
                reached = k;
            }
            return self.state_at(c, reached);
        }
        if self.free(nc, nh) {
            self.state_at(nc, nh)
        } else {
            s
        }
    }
}

impl Problem for LiftGrid {
    fn num_states(&self) -> usize {
        self.columns * self.heights
    }
    fn num_actions(&self) -> usize {
        4
    }
    fn is_goal(&self, s: StateId) -> bool {
        let (c, h) = self.position(s);
        h >= self.goal_height && c >= self.goal_columns.0 && c <= self.goal_columns.1
    }
    fn model_step(&self, s: StateId, a: ActionId) -> StateId {
        self.moved(s, LiftAction::ALL[a.index()], Self::LIFT)
    }
    fn cost(&self, _: StateId, _: ActionId) -> f64 {
        1.0
    }
}

impl Environment for LiftGrid {
    fn true_step(&self, s: StateId, a: ActionId) -> StateId {
        let action = LiftAction::ALL[a.index()];
        let (c, h) = self.position(s);
        if action == LiftAction::Up && self.lift_touches_band(h) {
            let lift = if self.strong[c] { 1 } else { 0 };
            return self.moved(s, action, lift);
        }
        self.moved(s, action, Self::LIFT)
    }
    fn start(&self) -> StateId {
        self.start
    }
    fn coordinates(&self, s: StateId) -> Vec<f64> {
        let (c, h) = self.position(s);
        vec![c as f64, h as f64]
    }
    fn claims_optimistic_model(&self) -> bool {
        true
    }
}

/// Normalized position and goal offsets; base is the light-object distance
/// (column offset plus lifts needed), an underestimate of the model's values.
impl FeatureMap for LiftGrid {
    fn dim(&self) -> usize {
        5
    }
    fn num_states(&self) -> usize {
        self.columns * self.heights
    }
    fn features(&self, s: StateId) -> Vec<f64> {
        let (c, h) = self.position(s);
        let (w, ht) = (self.columns as f64, self.heights as f64);
        let gc = c.clamp(self.goal_columns.0, self.goal_columns.1);
        vec![
            1.0,
            c as f64 / w,
            h as f64 / ht,
            (gc as f64 - c as f64) / w,
            (self.goal_height.saturating_sub(h)) as f64 / ht,
        ]
    }
    fn base_value(&self, s: StateId) -> f64 {
        if self.is_goal(s) {
            return 0.0;
        }
        let (c, h) = self.position(s);
        let dc = if c < self.goal_columns.0 {
            self.goal_columns.0 - c
        } else {
            c.saturating_sub(self.goal_columns.1)
        };
        let dh = self.goal_height.saturating_sub(h).div_ceil(Self::LIFT);
        (dc + dh) as f64
    }
}
