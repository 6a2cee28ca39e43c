use super::warehouse::{move_delta, A_DOWN, A_LEFT, A_NOOP, A_RIGHT, A_SPECIAL, A_UP, N_ACTIONS};
use super::{EpisodeInfo, StepOutcome};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const GRID: i32 = 10;
pub const MAX_HP: i32 = 10;
pub const ATTACK_RANGE: i32 = 1;
pub const SIGHT_RANGE: i32 = 3;
pub const EPISODE_LIMIT: usize = 200;
pub const KILL_REWARD: f64 = 10.0;
pub const DEATH_PENALTY: f64 = 10.0;
pub const WIN_BONUS: f64 = 200.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Unit {
    pub x: i32,
    pub y: i32,
    pub hp: i32,
}

impl Unit {
    pub fn alive(&self) -> bool {
        self.hp > 0
    }
}

fn chebyshev(a: (i32, i32), b: (i32, i32)) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn manhattan(a: (i32, i32), b: (i32, i32)) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

/// Two-team grid battle with scripted opponents.
///
/// Learned allies act first each step, in index order (move, or attack the
/// lowest-index living enemy in range). If that wipes the enemy team the
/// episode ends with a win bonus before the opponents react. Otherwise each
/// scripted enemy attacks an adjacent ally when it can and else takes one
/// greedy step toward the nearest living ally. Rewards are shared: kills pay,
/// ally deaths cost, and only eliminating the whole enemy team pays the
/// bonus. Running out the clock counts as a loss with no bonus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkirmishEnv {
    scenario: String,
    pub allies: Vec<Unit>,
    pub enemies: Vec<Unit>,
    pub t: usize,
    pub battle_won: bool,
    pub battle_over: bool,
    /// Total hit points removed from either team, for conservation checks.
    pub damage_dealt: i32,
    n_allies: usize,
    n_enemies: usize,
}

impl SkirmishEnv {
    pub fn named(name: &str) -> Result<Self> {
        let (n_allies, n_enemies) = match name {
            "skirmish-5v5" => (5, 5),
            "skirmish-5v6" => (5, 6),
            "skirmish-8v9" => (8, 9),
            other => return Err(Error::Config(format!("unknown skirmish scenario '{other}'"))),
        };
        let mut env = Self::custom(n_allies, n_enemies)?;
        env.scenario = name.to_string();
        Ok(env)
    }

    /// Arbitrary team sizes, used by tests. Teams spawn as facing columns.
    pub fn custom(n_allies: usize, n_enemies: usize) -> Result<Self> {
        if n_allies == 0 || n_enemies == 0 {
            return Err(Error::Config("skirmish: both teams need at least one unit".into()));
        }
        if n_allies as i32 > GRID || n_enemies as i32 > GRID {
            return Err(Error::Config("skirmish: team does not fit in a spawn column".into()));
        }
        let mut env = SkirmishEnv {
            scenario: "skirmish-custom".to_string(),
            allies: Vec::new(),
            enemies: Vec::new(),
            t: 0,
            battle_won: false,
            battle_over: false,
            damage_dealt: 0,
            n_allies,
            n_enemies,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn n_agents(&self) -> usize {
        self.n_allies
    }

    pub fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    pub fn obs_dim(&self) -> usize {
        3 + 5 * (self.n_allies + self.n_enemies)
    }

    pub fn state_dim(&self) -> usize {
        4 * (self.n_allies + self.n_enemies) + 1
    }

    pub fn episode_limit(&self) -> usize {
        EPISODE_LIMIT
    }

    /// Spawns are fixed columns, so the layout itself carries no randomness;
    /// the seed is accepted for interface symmetry.
    pub fn reset(&mut self, _seed: u64) {
        let column = |n: usize, x: i32| -> Vec<Unit> {
            let y0 = (GRID - n as i32) / 2;
            (0..n as i32).map(|i| Unit { x, y: y0 + i, hp: MAX_HP }).collect()
        };
        self.allies = column(self.n_allies, 1);
        self.enemies = column(self.n_enemies, GRID - 2);
        self.t = 0;
        self.battle_won = false;
        self.battle_over = false;
        self.damage_dealt = 0;
    }

    fn occupied(&self, cell: (i32, i32)) -> bool {
        self.allies.iter().chain(self.enemies.iter()).any(|u| u.alive() && (u.x, u.y) == cell)
    }

    fn in_bounds(cell: (i32, i32)) -> bool {
        cell.0 >= 0 && cell.0 < GRID && cell.1 >= 0 && cell.1 < GRID
    }

    fn free(&self, cell: (i32, i32)) -> bool {
        Self::in_bounds(cell) && !self.occupied(cell)
    }

    fn enemy_in_attack_range(&self, agent: usize) -> Option<usize> {
        let me = (self.allies[agent].x, self.allies[agent].y);
        self.enemies
            .iter()
            .position(|e| e.alive() && chebyshev(me, (e.x, e.y)) <= ATTACK_RANGE)
    }

    pub fn action_mask(&self, agent: usize) -> Vec<bool> {
        let mut mask = vec![false; N_ACTIONS];
        mask[A_NOOP] = true;
        if !self.allies[agent].alive() || self.battle_over {
            return mask;
        }
        let me = (self.allies[agent].x, self.allies[agent].y);
        for a in [A_UP, A_DOWN, A_LEFT, A_RIGHT] {
            let (dx, dy) = move_delta(a);
            mask[a] = self.free((me.0 + dx, me.1 + dy));
        }
        mask[A_SPECIAL] = self.enemy_in_attack_range(agent).is_some();
        mask
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        if actions.len() != self.n_allies {
            return Err(Error::Usage(format!(
                "joint action has {} entries for {} agents",
                actions.len(),
                self.n_allies
            )));
        }
        if self.battle_over {
            return Err(Error::Usage("step called on a finished battle".into()));
        }
        let masks: Vec<Vec<bool>> = (0..self.n_allies).map(|i| self.action_mask(i)).collect();
        for (i, &a) in actions.iter().enumerate() {
            if a >= N_ACTIONS || !masks[i][a] {
                return Err(Error::Usage(format!("agent {i}: illegal action {a}")));
            }
        }

        let mut reward = 0.0;

        // Ally phase, ascending index. Legality is re-checked at execution:
        // an earlier ally may have taken the cell or killed the target.
        for (i, &a) in actions.iter().enumerate() {
            if !self.allies[i].alive() {
                continue;
            }
            match a {
                A_NOOP => {}
                A_UP | A_DOWN | A_LEFT | A_RIGHT => {
                    let (dx, dy) = move_delta(a);
                    let me = (self.allies[i].x, self.allies[i].y);
                    let target = (me.0 + dx, me.1 + dy);
                    if self.free(target) {
                        self.allies[i].x = target.0;
                        self.allies[i].y = target.1;
                    }
                }
                A_SPECIAL => {
                    if let Some(e) = self.enemy_in_attack_range(i) {
                        self.enemies[e].hp -= 1;
                        self.damage_dealt += 1;
                        if !self.enemies[e].alive() {
                            reward += KILL_REWARD;
                        }
                    }
                }
                _ => unreachable!("validated above"),
            }
        }

        if self.enemies.iter().all(|e| !e.alive()) {
            reward += WIN_BONUS;
            self.battle_won = true;
            self.battle_over = true;
            self.t += 1;
            return Ok(StepOutcome { reward, terminated: true });
        }

        // Scripted enemy phase, ascending index: attack an adjacent ally
        // (lowest index) or take one greedy Manhattan step toward the
        // nearest living ally, horizontal candidate before vertical.
        for e in 0..self.enemies.len() {
            if !self.enemies[e].alive() {
                continue;
            }
            let pos = (self.enemies[e].x, self.enemies[e].y);
            let adjacent = self
                .allies
                .iter()
                .position(|a| a.alive() && chebyshev(pos, (a.x, a.y)) <= ATTACK_RANGE);
            if let Some(v) = adjacent {
                self.allies[v].hp -= 1;
                self.damage_dealt += 1;
                if !self.allies[v].alive() {
                    reward -= DEATH_PENALTY;
                }
                continue;
            }
            let nearest = self
                .allies
                .iter()
                .filter(|a| a.alive())
                .map(|a| (a.x, a.y))
                .min_by_key(|&c| (manhattan(pos, c), c.0, c.1));
            if let Some(goal) = nearest {
                let mut candidates = Vec::new();
                if goal.0 != pos.0 {
                    candidates.push(((goal.0 - pos.0).signum(), 0));
                }
                if goal.1 != pos.1 {
                    candidates.push((0, (goal.1 - pos.1).signum()));
                }
                for (dx, dy) in candidates {
                    let target = (pos.0 + dx, pos.1 + dy);
                    if self.free(target) {
                        self.enemies[e].x = target.0;
                        self.enemies[e].y = target.1;
                        break;
                    }
                }
            }
        }

        if self.allies.iter().all(|a| !a.alive()) {
            reward -= WIN_BONUS;
            self.battle_over = true;
        }

        self.t += 1;
        if self.t >= EPISODE_LIMIT {
            self.battle_over = true;
        }
        Ok(StepOutcome { reward, terminated: self.battle_over })
    }

    /// Own position and health, then one five-feature slot per other unit,
    /// visible units first, sorted by distance then global index (allies
    /// before enemies): visibility flag, relative offset scaled by sight
    /// range, health fraction, team flag. Units beyond sight range and dead
    /// units leave their slots zero. A dead observer sees nothing.
    pub fn observe(&self, agent: usize) -> Vec<f64> {
        let mut obs = vec![0.0; self.obs_dim()];
        let me = &self.allies[agent];
        if !me.alive() {
            return obs;
        }
        obs[0] = me.x as f64 / (GRID - 1) as f64;
        obs[1] = me.y as f64 / (GRID - 1) as f64;
        obs[2] = me.hp as f64 / MAX_HP as f64;

        let mut visible: Vec<(i32, usize)> = Vec::new();
        for (g, u) in self.allies.iter().chain(self.enemies.iter()).enumerate() {
            if g == agent || !u.alive() {
                continue;
            }
            let d = chebyshev((me.x, me.y), (u.x, u.y));
            if d <= SIGHT_RANGE {
                visible.push((d, g));
            }
        }
        visible.sort_unstable();
        for (slot, &(_, g)) in visible.iter().enumerate() {
            let u = if g < self.n_allies {
                &self.allies[g]
            } else {
                &self.enemies[g - self.n_allies]
            };
            let base = 3 + 5 * slot;
            obs[base] = 1.0;
            obs[base + 1] = (u.x - me.x) as f64 / SIGHT_RANGE as f64;
            obs[base + 2] = (u.y - me.y) as f64 / SIGHT_RANGE as f64;
            obs[base + 3] = u.hp as f64 / MAX_HP as f64;
            obs[base + 4] = (g >= self.n_allies) as i32 as f64;
        }
        obs
    }

    /// Absolute features of every unit on both teams plus the normalized
    /// step counter. Dead units zero out, including their alive flag.
    pub fn global_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for u in self.allies.iter().chain(self.enemies.iter()) {
            if u.alive() {
                s.push(u.x as f64 / (GRID - 1) as f64);
                s.push(u.y as f64 / (GRID - 1) as f64);
                s.push(u.hp as f64 / MAX_HP as f64);
                s.push(1.0);
            } else {
                s.extend_from_slice(&[0.0, 0.0, 0.0, 0.0]);
            }
        }
        s.push(self.t as f64 / EPISODE_LIMIT as f64);
        s
    }

    pub fn episode_info(&self) -> EpisodeInfo {
        EpisodeInfo {
            deliveries: 0,
            enemies_killed: self.enemies.iter().filter(|e| !e.alive()).count() as u32,
            allies_dead: self.allies.iter().filter(|a| !a.alive()).count() as u32,
            battle_won: self.battle_won,
        }
    }

    pub fn state_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "skirmish scenario={} t={} won={} over={} damage={}",
            self.scenario, self.t, self.battle_won as i32, self.battle_over as i32,
            self.damage_dealt
        );
        for (tag, units) in [("ally", &self.allies), ("enemy", &self.enemies)] {
            for (i, u) in units.iter().enumerate() {
                let _ = writeln!(out, "{tag} id={i} pos=({},{}) hp={}", u.x, u.y, u.hp);
            }
        }
        out
    }
}
