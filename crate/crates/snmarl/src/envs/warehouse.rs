use super::{EpisodeInfo, StepOutcome};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Actions shared by both grid environments.
pub const A_NOOP: usize = 0;
pub const A_UP: usize = 1;
pub const A_DOWN: usize = 2;
pub const A_LEFT: usize = 3;
pub const A_RIGHT: usize = 4;
/// Warehouse: toggle load. Skirmish: attack.
pub const A_SPECIAL: usize = 5;

pub const N_ACTIONS: usize = 6;

pub(crate) fn move_delta(action: usize) -> (i32, i32) {
    match action {
        A_UP => (0, -1),
        A_DOWN => (0, 1),
        A_LEFT => (-1, 0),
        A_RIGHT => (1, 0),
        _ => (0, 0),
    }
}

/// Shelf-delivery warehouse.
///
/// Agents pick up shelves (`toggle` on a shelf cell), carry them, and earn a
/// shared `+1` for moving a *requested* shelf onto any goal cell. A delivered
/// shelf teleports back to its home cell and a new request is drawn uniformly
/// from the currently unrequested shelves, so exactly `n_requested` shelves
/// are requested at all times. Episodes run a fixed number of steps.
///
/// Movement runs in ascending agent order; an agent moves only into an
/// in-bounds cell free of agents, and a *carrying* agent additionally cannot
/// enter a cell holding a stationary shelf. Agents without a load walk under
/// shelves freely. A carried shelf may be put down anywhere except another
/// shelf's home cell, which keeps every home cell free for delivery
/// teleports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarehouseEnv {
    scenario: String,
    pub width: i32,
    pub height: i32,
    pub shelf_homes: Vec<(i32, i32)>,
    pub goals: Vec<(i32, i32)>,
    pub spawns: Vec<(i32, i32)>,
    pub n_requested: usize,
    pub episode_steps: usize,

    pub agent_pos: Vec<(i32, i32)>,
    pub carrying: Vec<Option<usize>>,
    pub shelf_pos: Vec<(i32, i32)>,
    pub requested: Vec<bool>,
    pub t: usize,
    pub deliveries: u32,
    rng: ChaCha8Rng,
}

impl WarehouseEnv {
    /// Named desk-scale layouts. Shelves sit in two column bands with a
    /// corridor between them; the whole bottom row is the goal/spawn row.
    pub fn named(name: &str) -> Result<Self> {
        let (width, height, n_agents, shelf_rows) = match name {
            "warehouse-tiny-2ag" => (8, 8, 2, 1..=4),
            "warehouse-tiny-4ag" => (8, 8, 4, 1..=4),
            "warehouse-small-2ag" => (8, 12, 2, 1..=8),
            other => return Err(Error::Config(format!("unknown warehouse layout '{other}'"))),
        };
        let mut shelf_homes = Vec::new();
        for y in shelf_rows {
            for x in [1, 2, 5, 6] {
                shelf_homes.push((x, y));
            }
        }
        let goals: Vec<(i32, i32)> = (0..width).map(|x| (x, height - 1)).collect();
        let spawns: Vec<(i32, i32)> = (0..n_agents as i32).map(|x| (x, height - 1)).collect();
        let mut env = Self::custom(width, height, shelf_homes, goals, spawns, n_agents, 500)?;
        env.scenario = name.to_string();
        Ok(env)
    }

    /// Fully custom layout, used by tests. `n_requested` equals the number of
    /// agents in the named layouts but may differ here.
    pub fn custom(
        width: i32,
        height: i32,
        shelf_homes: Vec<(i32, i32)>,
        goals: Vec<(i32, i32)>,
        spawns: Vec<(i32, i32)>,
        n_requested: usize,
        episode_steps: usize,
    ) -> Result<Self> {
        if width <= 0 || height <= 0 {
            return Err(Error::Config("warehouse: grid must be non-empty".into()));
        }
        if shelf_homes.len() < n_requested || n_requested == 0 {
            return Err(Error::Config("warehouse: need at least n_requested shelves".into()));
        }
        if spawns.is_empty() {
            return Err(Error::Config("warehouse: need at least one agent".into()));
        }
        for list in [&shelf_homes, &spawns] {
            for (i, a) in list.iter().enumerate() {
                if list[..i].contains(a) {
                    return Err(Error::Config("warehouse: duplicate cell in layout".into()));
                }
            }
        }
        let in_bounds =
            |&(x, y): &(i32, i32)| x >= 0 && x < width && y >= 0 && y < height;
        if !shelf_homes.iter().all(in_bounds)
            || !goals.iter().all(in_bounds)
            || !spawns.iter().all(in_bounds)
        {
            return Err(Error::Config("warehouse: layout cell out of bounds".into()));
        }
        if shelf_homes.iter().any(|c| spawns.contains(c)) {
            return Err(Error::Config("warehouse: spawn on a shelf home".into()));
        }
        let n_agents = spawns.len();
        let n_shelves = shelf_homes.len();
        Ok(WarehouseEnv {
            scenario: "warehouse-custom".to_string(),
            width,
            height,
            shelf_homes,
            goals,
            spawns: spawns.clone(),
            n_requested,
            episode_steps,
            agent_pos: spawns,
            carrying: vec![None; n_agents],
            shelf_pos: vec![(0, 0); n_shelves],
            requested: vec![false; n_shelves],
            t: 0,
            deliveries: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && x < self.width && y >= 0 && y < self.height
    }

    fn agent_at(&self, cell: (i32, i32)) -> Option<usize> {
        self.agent_pos.iter().position(|&p| p == cell)
    }

    /// A shelf at `cell` not carried by any agent.
    fn stationary_shelf_at(&self, cell: (i32, i32)) -> Option<usize> {
        (0..self.shelf_pos.len())
            .find(|&s| self.shelf_pos[s] == cell && !self.carrying.contains(&Some(s)))
    }

    fn is_goal(&self, cell: (i32, i32)) -> bool {
        self.goals.contains(&cell)
    }

    /// Home cell of any shelf other than `except`.
    fn is_foreign_home(&self, cell: (i32, i32), except: usize) -> bool {
        self.shelf_homes
            .iter()
            .enumerate()
            .any(|(s, &home)| s != except && home == cell)
    }

    fn move_allowed(&self, agent: usize, target: (i32, i32)) -> bool {
        if !self.in_bounds(target.0, target.1) || self.agent_at(target).is_some() {
            return false;
        }
        if self.carrying[agent].is_some() && self.stationary_shelf_at(target).is_some() {
            return false;
        }
        true
    }

    fn toggle_allowed(&self, agent: usize) -> bool {
        let pos = self.agent_pos[agent];
        match self.carrying[agent] {
            None => self.stationary_shelf_at(pos).is_some(),
            Some(s) => !self.is_foreign_home(pos, s),
        }
    }

    fn resample_request(&mut self) {
        let candidates: Vec<usize> =
            (0..self.requested.len()).filter(|&s| !self.requested[s]).collect();
        assert!(!candidates.is_empty(), "warehouse: no shelf left to request");
        let pick = candidates[self.rng.gen_range(0..candidates.len())];
        self.requested[pick] = true;
    }

    pub fn n_agents(&self) -> usize {
        self.agent_pos.len()
    }

    pub fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    pub fn obs_dim(&self) -> usize {
        4 * 9 + 4
    }

    pub fn state_dim(&self) -> usize {
        4 * self.n_agents() + 4 * self.shelf_pos.len() + 1
    }

    pub fn episode_limit(&self) -> usize {
        self.episode_steps
    }

    pub fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.agent_pos = self.spawns.clone();
        self.carrying = vec![None; self.n_agents()];
        self.shelf_pos = self.shelf_homes.clone();
        self.requested = vec![false; self.shelf_pos.len()];
        // Draw n_requested distinct shelves by partial Fisher-Yates.
        let mut ids: Vec<usize> = (0..self.shelf_pos.len()).collect();
        for i in 0..self.n_requested {
            let j = self.rng.gen_range(i..ids.len());
            ids.swap(i, j);
            self.requested[ids[i]] = true;
        }
        self.t = 0;
        self.deliveries = 0;
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if actions.len() != self.n_agents() {
            return Err(Error::Usage(format!(
                "joint action has {} entries for {} agents",
                actions.len(),
                self.n_agents()
            )));
        }
        let masks: Vec<Vec<bool>> = (0..self.n_agents()).map(|i| self.action_mask(i)).collect();
        for (i, &a) in actions.iter().enumerate() {
            if a >= N_ACTIONS || !masks[i][a] {
                return Err(Error::Usage(format!("agent {i}: illegal action {a}")));
            }
        }

        let mut reward = 0.0;
        for (i, &a) in actions.iter().enumerate() {
            match a {
                A_NOOP => {}
                A_UP | A_DOWN | A_LEFT | A_RIGHT => {
                    let (dx, dy) = move_delta(a);
                    let pos = self.agent_pos[i];
                    let target = (pos.0 + dx, pos.1 + dy);
                    // Legality is re-checked here: an earlier agent may have
                    // moved into the target this very step.
                    if self.move_allowed(i, target) {
                        self.agent_pos[i] = target;
                        if let Some(s) = self.carrying[i] {
                            self.shelf_pos[s] = target;
                            if self.requested[s] && self.is_goal(target) {
                                reward += 1.0;
                                self.deliveries += 1;
                                self.shelf_pos[s] = self.shelf_homes[s];
                                self.carrying[i] = None;
                                self.requested[s] = false;
                                self.resample_request();
                            }
                        }
                    }
                }
                A_SPECIAL => {
                    let pos = self.agent_pos[i];
                    match self.carrying[i] {
                        None => {
                            if let Some(s) = self.stationary_shelf_at(pos) {
                                self.carrying[i] = Some(s);
                            }
                        }
                        Some(s) => {
                            if !self.is_foreign_home(pos, s) {
                                self.carrying[i] = None;
                                self.shelf_pos[s] = pos;
                            }
                        }
                    }
                }
                _ => unreachable!("validated above"),
            }
        }
        self.t += 1;
        Ok(StepOutcome { reward, terminated: self.t >= self.episode_steps })
    }

    /// 3×3 window around the agent with four channels (agents, shelves,
    /// requested shelves, goals, each 9 cells row-major), then the carrying
    /// flag, a flag for "carried shelf is requested", and the normalized own
    /// position. Cells outside the grid read as occupied in the agent
    /// channel, like walls.
    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let (ax, ay) = self.agent_pos[agent];
        let mut obs = vec![0.0; self.obs_dim()];
        let mut idx = 0;
        for channel in 0..4 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let cell = (ax + dx, ay + dy);
                    let v = if !self.in_bounds(cell.0, cell.1) {
                        (channel == 0) as i32 as f64
                    } else {
                        match channel {
                            0 => self.agent_at(cell).is_some() as i32 as f64,
                            1 => self.shelf_pos.contains(&cell) as i32 as f64,
                            2 => self
                                .shelf_pos
                                .iter()
                                .enumerate()
                                .any(|(s, &p)| p == cell && self.requested[s])
                                as i32 as f64,
                            _ => self.is_goal(cell) as i32 as f64,
                        }
                    };
                    obs[idx] = v;
                    idx += 1;
                }
            }
        }
        obs[36] = self.carrying[agent].is_some() as i32 as f64;
        obs[37] = self.carrying[agent].map_or(false, |s| self.requested[s]) as i32 as f64;
        obs[38] = self.agent_pos[agent].0 as f64 / (self.width - 1).max(1) as f64;
        obs[39] = self.agent_pos[agent].1 as f64 / (self.height - 1).max(1) as f64;
        obs
    }

    /// Absolute features of every agent and shelf plus the normalized step.
    pub fn global_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        let wn = (self.width - 1).max(1) as f64;
        let hn = (self.height - 1).max(1) as f64;
        for i in 0..self.n_agents() {
            s.push(self.agent_pos[i].0 as f64 / wn);
            s.push(self.agent_pos[i].1 as f64 / hn);
            s.push(self.carrying[i].is_some() as i32 as f64);
            s.push(self.carrying[i].map_or(false, |sh| self.requested[sh]) as i32 as f64);
        }
        for sh in 0..self.shelf_pos.len() {
            s.push(self.shelf_pos[sh].0 as f64 / wn);
            s.push(self.shelf_pos[sh].1 as f64 / hn);
            s.push(self.requested[sh] as i32 as f64);
            s.push(self.carrying.contains(&Some(sh)) as i32 as f64);
        }
        s.push(self.t as f64 / self.episode_steps as f64);
        s
    }

    pub fn action_mask(&self, agent: usize) -> Vec<bool> {
        let mut mask = vec![false; N_ACTIONS];
        mask[A_NOOP] = true;
        let pos = self.agent_pos[agent];
        for a in [A_UP, A_DOWN, A_LEFT, A_RIGHT] {
            let (dx, dy) = move_delta(a);
            mask[a] = self.move_allowed(agent, (pos.0 + dx, pos.1 + dy));
        }
        mask[A_SPECIAL] = self.toggle_allowed(agent);
        mask
    }

    pub fn episode_info(&self) -> EpisodeInfo {
        EpisodeInfo { deliveries: self.deliveries, ..EpisodeInfo::default() }
    }

    pub fn state_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "warehouse scenario={} t={} deliveries={}",
            self.scenario, self.t, self.deliveries
        );
        for i in 0..self.n_agents() {
            let carry = match self.carrying[i] {
                Some(s) => s.to_string(),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "agent id={} pos=({},{}) carrying={}",
                i, self.agent_pos[i].0, self.agent_pos[i].1, carry
            );
        }
        for s in 0..self.shelf_pos.len() {
            let _ = writeln!(
                out,
                "shelf id={} pos=({},{}) home=({},{}) requested={}",
                s,
                self.shelf_pos[s].0,
                self.shelf_pos[s].1,
                self.shelf_homes[s].0,
                self.shelf_homes[s].1,
                self.requested[s] as i32
            );
        }
        out
    }
}
