use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Six evaluation buckets mirroring the benchmark suite. The first two carry
/// weight 0.2 in the Overall utility, the remaining four 0.15.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    HardA,
    HardB,
    Mid,
    EasyA,
    EasyB,
    EasyC,
}

impl Bucket {
    pub const ALL: [Bucket; 6] = [
        Bucket::HardA,
        Bucket::HardB,
        Bucket::Mid,
        Bucket::EasyA,
        Bucket::EasyB,
        Bucket::EasyC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::HardA => "hard_a",
            Bucket::HardB => "hard_b",
            Bucket::Mid => "mid",
            Bucket::EasyA => "easy_a",
            Bucket::EasyB => "easy_b",
            Bucket::EasyC => "easy_c",
        }
    }

    /// Benchmark column this bucket stands in for.
    pub fn benchmark(self) -> &'static str {
        match self {
            Bucket::HardA => "aime24",
            Bucket::HardB => "aime25",
            Bucket::Mid => "amc",
            Bucket::EasyA => "math500",
            Bucket::EasyB => "minerva",
            Bucket::EasyC => "olympiad",
        }
    }

    pub fn weight(self) -> f64 {
        match self {
            Bucket::HardA | Bucket::HardB => 0.2,
            _ => 0.15,
        }
    }

    /// Buckets scored by best-of-32 sampling; the rest use greedy accuracy.
    pub fn uses_pass_at_k(self) -> bool {
        matches!(self, Bucket::HardA | Bucket::HardB | Bucket::Mid)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Bucket::ALL
            .into_iter()
            .find(|b| b.name() == norm || b.benchmark() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown bucket `{s}`")))
    }
}

fn default_true() -> bool {
    true
}

/// One bandit task: pick the target among `n_strategies` arms.
///
/// Tasks sharing a `skill` share policy parameters, so held-out evaluation
/// tasks probe what training on sibling tasks taught.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub bucket: Bucket,
    pub skill: String,
    pub n_strategies: usize,
    pub target_strategy: usize,
    pub format_noise: f64,
    pub length_base: f64,
    pub length_spread: f64,
    /// False for tasks no strategy can solve.
    #[serde(default = "default_true")]
    pub solvable: bool,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidInput(format!("task `{}`: {reason}", self.task_id));
        if self.n_strategies < 2 {
            return Err(bad("n_strategies must be at least 2".into()));
        }
        if self.target_strategy >= self.n_strategies {
            return Err(bad(format!(
                "target_strategy {} out of range for {} strategies",
                self.target_strategy, self.n_strategies
            )));
        }
        if !(0.0..1.0).contains(&self.format_noise) {
            return Err(bad("format_noise must lie in [0, 1)".into()));
        }
        if !(self.length_base > 0.0 && self.length_base.is_finite()) {
            return Err(bad("length_base must be positive".into()));
        }
        if !(self.length_spread > 0.0 && self.length_spread.is_finite()) {
            return Err(bad("length_spread must be positive".into()));
        }
        Ok(())
    }
}

/// Training tasks plus held-out evaluation tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub train: Vec<TaskSpec>,
    pub eval: Vec<TaskSpec>,
}

impl Curriculum {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::invalid("curriculum has no training tasks"));
        }
        let mut ids = BTreeSet::new();
        let mut skills: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for task in self.train.iter().chain(&self.eval) {
            task.validate()?;
            if !ids.insert(task.task_id.as_str()) {
                return Err(Error::invalid(format!(
                    "task id `{}` appears twice; train and eval tasks must be disjoint",
                    task.task_id
                )));
            }
            let shape = (task.n_strategies, task.target_strategy);
            if let Some(prev) = skills.insert(&task.skill, shape) {
                if prev != shape {
                    return Err(Error::invalid(format!(
                        "skill `{}` has inconsistent strategy count or target",
                        task.skill
                    )));
                }
            }
        }
        Ok(())
    }

    /// The standard six-bucket curriculum: four skills per bucket, two
    /// training and two evaluation instances per skill.
    pub fn standard(seed: u64) -> Self {
        const SKILLS_PER_BUCKET: usize = 4;
        const HARD_N: usize = 128;
        const HARD_NOISE: f64 = 0.3;
        const MID_N: usize = 64;
        const EA: usize = 96;
        const EB: usize = 400;
        const EC: usize = 256;
        let mut rng = seed::rng(seed::derive(seed, &[0xC0]));
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for bucket in Bucket::ALL {
            let (n, noise, base) = match bucket {
                Bucket::HardA | Bucket::HardB => (HARD_N, HARD_NOISE, 900.0),
                Bucket::Mid => (MID_N, 0.1, 600.0),
                Bucket::EasyA => (EA, 0.05, 350.0),
                Bucket::EasyB => (EB, 0.05, 400.0),
                Bucket::EasyC => (EC, 0.08, 500.0),
            };
            for s in 0..SKILLS_PER_BUCKET {
                let skill = format!("{}.s{s}", bucket.name());
                let target = rng.random_range(0..n);
                for (split, out) in [("train", &mut train), ("eval", &mut eval)] {
                    for k in 0..2 {
                        let jitter: f64 = rng.random_range(0.85..1.15);
                        out.push(TaskSpec {
                            task_id: format!("{skill}.{split}{k}"),
                            bucket,
                            skill: skill.clone(),
                            n_strategies: n,
                            target_strategy: target,
                            format_noise: noise,
                            length_base: base * jitter,
                            length_spread: base * 0.25,
                            solvable: true,
                        });
                    }
                }
            }
        }
        Curriculum { train, eval }
    }

    /// Tasks that no policy can solve, with no format noise. Every sampled
    /// group is all-fail and all-valid.
    pub fn all_fail() -> Self {
        let task = |i: usize, split: &str| TaskSpec {
            task_id: format!("unsolvable.{split}{i}"),
            bucket: Bucket::ALL[i % 6],
            skill: format!("unsolvable.s{i}"),
            n_strategies: 3,
            target_strategy: 0,
            format_noise: 0.0,
            length_base: 200.0,
            length_spread: 50.0,
            solvable: false,
        };
        Curriculum {
            train: (0..6).map(|i| task(i, "train")).collect(),
            eval: (0..6).map(|i| task(i, "eval")).collect(),
        }
    }
}
