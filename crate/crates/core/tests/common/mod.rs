//! Shared fixtures for the integration tests: independent brute-force loss
//! oracles, random tiny instances, and random frozen step plans.

#![allow(dead_code)]

use adt_ssl::losses::{similar_loss, similar_pairs, supervised_loss, unsup_loss_high, unsup_loss_mid, SimilarTuple};
use adt_ssl::model::InputShape;
use adt_ssl::prob::sharpen;
use adt_ssl::trainer::{objective, PlanEntry, StepPlan};
use adt_ssl::{Architecture, LossWeights, ModelParams, ProbVector, Route, ThresholdRegistry, UnlabeledRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FLOOR: f64 = 1e-12;

/// A random distribution over `c` classes. `spread` controls how peaked it
/// tends to be; some draws are exactly one-hot.
pub fn random_dist(rng: &mut impl Rng, c: usize, spread: f64) -> Vec<f64> {
    if rng.random_bool(0.05) {
        let mut v = vec![0.0; c];
        v[rng.random_range(0..c)] = 1.0;
        return v;
    }
    let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-spread..spread)).collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn prob(v: Vec<f64>) -> ProbVector {
    ProbVector::new(v).expect("valid distribution")
}

fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn vmax(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn neg_log(p: f64) -> f64 {
    -(p.max(FLOOR)).ln()
}

fn bc(p: &[f64], q: &[f64]) -> f64 {
    let fl = |v: &[f64]| {
        let w: Vec<f64> = v.iter().map(|x| x.max(FLOOR)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (a, b) = (fl(p), fl(q));
    let mut s = 0.0;
    for c in 0..a.len() {
        s += (a[c] * b[c]).sqrt();
    }
    s.min(1.0)
}

/// One tiny problem, stored as plain vectors.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub c: usize,
    pub tau: f64,
    pub sim_threshold: f64,
    pub thresholds: Vec<f64>,
    pub labeled: Vec<(usize, Vec<f64>)>,
    /// Per unlabeled sample: weak-view predictions and strong-view predictions.
    pub weak: Vec<Vec<Vec<f64>>>,
    pub strong: Vec<Vec<Vec<f64>>>,
    pub temperature: f64,
}

impl TinyInstance {
    /// `B ≤ 4`, `K ≤ 2`, `K_strong ≤ 2`, `C ≤ 3`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = rng.random_range(2..=3);
        let b = rng.random_range(1..=4);
        let k = rng.random_range(1..=2);
        let ks = rng.random_range(1..=2);
        let spread = rng.random_range(1.0..8.0);
        let labeled = (0..rng.random_range(1..=4))
            .map(|_| (rng.random_range(0..c), random_dist(&mut rng, c, spread)))
            .collect();
        let weak = (0..b)
            .map(|_| (0..k).map(|_| random_dist(&mut rng, c, spread)).collect())
            .collect();
        let strong = (0..b)
            .map(|_| (0..ks).map(|_| random_dist(&mut rng, c, spread)).collect())
            .collect();
        TinyInstance {
            c,
            tau: rng.random_range(0.5..1.0),
            sim_threshold: rng.random_range(0.3..1.0),
            thresholds: (0..c).map(|_| rng.random_range(0.3..0.95)).collect(),
            labeled,
            weak,
            strong,
            temperature: [0.25, 0.5, 1.0][rng.random_range(0..3)],
        }
    }

    pub fn q_bar(&self, b: usize) -> Vec<f64> {
        let views = &self.weak[b];
        (0..self.c)
            .map(|i| views.iter().map(|v| v[i]).sum::<f64>() / views.len() as f64)
            .collect()
    }

    pub fn q_hat(&self, b: usize) -> Vec<f64> {
        let q = self.q_bar(b);
        let w: Vec<f64> = q.iter().map(|x| x.powf(1.0 / self.temperature)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    fn views(&self) -> usize {
        self.strong.iter().map(|s| s.len()).sum()
    }

    pub fn oracle_lx(&self) -> f64 {
        let mut s = 0.0;
        for (y, p) in &self.labeled {
            s += neg_log(p[*y]);
        }
        s / self.labeled.len() as f64
    }

    pub fn oracle_lu1(&self) -> f64 {
        let mut s = 0.0;
        for b in 0..self.weak.len() {
            let qh = self.q_hat(b);
            if vmax(&qh) >= self.tau {
                let t = first_argmax(&qh);
                for p in &self.strong[b] {
                    s += neg_log(p[t]);
                }
            }
        }
        s / self.views() as f64
    }

    pub fn oracle_lu2(&self) -> f64 {
        let mut s = 0.0;
        for b in 0..self.weak.len() {
            let (qb, qh) = (self.q_bar(b), self.q_hat(b));
            let mid = vmax(&qh) < self.tau && vmax(&qb) > self.thresholds[first_argmax(&qb)];
            if mid {
                for p in &self.strong[b] {
                    for i in 0..self.c {
                        s += (qh[i] - p[i]).powi(2);
                    }
                }
            }
        }
        s / (self.c * self.views()) as f64
    }

    pub fn oracle_ls(&self) -> f64 {
        let mut flat = Vec::new();
        for b in 0..self.weak.len() {
            for p in &self.strong[b] {
                flat.push((self.q_bar(b), self.q_hat(b), p.clone()));
            }
        }
        let n = flat.len();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j || vmax(&flat[i].1) < self.tau {
                    continue;
                }
                if bc(&flat[i].0, &flat[j].0) > self.sim_threshold {
                    s += neg_log(flat[j].2[first_argmax(&flat[i].1)]);
                }
            }
        }
        s / (n * (n - 1)) as f64
    }

    pub fn registry(&self) -> ThresholdRegistry {
        let mut reg = ThresholdRegistry::new(self.c).unwrap();
        for (i, &t) in self.thresholds.iter().enumerate() {
            reg.set_threshold(i, t).unwrap();
        }
        reg
    }

    pub fn records(&self) -> Vec<UnlabeledRecord> {
        (0..self.weak.len())
            .map(|b| {
                let q_bar = prob(self.q_bar(b));
                UnlabeledRecord {
                    sample_id: b as u64,
                    q_hat: sharpen(&q_bar, self.temperature).unwrap(),
                    q_bar,
                    strong_preds: self.strong[b].iter().cloned().map(prob).collect(),
                }
            })
            .collect()
    }

    /// The four library loss values on this instance.
    pub fn library(&self) -> [f64; 4] {
        let batch: Vec<(usize, ProbVector)> = self
            .labeled
            .iter()
            .enumerate()
            .map(|(i, (y, _))| (i, ProbVector::indicator(self.c, *y).unwrap()))
            .collect();
        let lx = supervised_loss(&batch, |&i| Ok(prob(self.labeled[i].1.clone()))).unwrap();
        let records = self.records();
        let lu1 = unsup_loss_high(&records, self.tau).unwrap();
        let lu2 = unsup_loss_mid(&records, self.tau, &self.registry(), self.c).unwrap();
        let mut tuples = Vec::new();
        for r in &records {
            for p in &r.strong_preds {
                tuples.push(SimilarTuple {
                    view: p.clone(),
                    q_bar: r.q_bar.clone(),
                    q_hat: r.q_hat.clone(),
                });
            }
        }
        let ls = similar_loss(&tuples, self.tau, self.sim_threshold, |p: &ProbVector| Ok(p.clone())).unwrap();
        [lx, lu1, lu2, ls]
    }

    pub fn oracle(&self) -> [f64; 4] {
        [self.oracle_lx(), self.oracle_lu1(), self.oracle_lu2(), self.oracle_ls()]
    }
}

/// A random frozen plan over a `dim → hidden → C` network.
pub struct GradInstance {
    pub params: ModelParams,
    pub plan: StepPlan,
}

impl GradInstance {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(2..=4);
        let c = rng.random_range(2..=4);
        let arch = Architecture {
            input: InputShape::Vector { dim },
            conv: None,
            hidden: vec![rng.random_range(3..=6)],
            num_classes: c,
        };
        let params = ModelParams::init(arch, seed).unwrap();
        let mut reg = ThresholdRegistry::new(c).unwrap();
        for i in 0..c {
            reg.set_threshold(i, rng.random_range(0.3..0.95)).unwrap();
        }
        let tau = rng.random_range(0.6..0.95);
        let vec_in = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();

        let nl = rng.random_range(1..=4);
        let labeled_inputs = (0..nl).map(|_| vec_in(&mut rng)).collect();
        let labels = (0..nl).map(|_| rng.random_range(0..c)).collect();
        let mut entries = Vec::new();
        for b in 0..rng.random_range(2..=6) {
            let q_bar = prob(random_dist(&mut rng, c, 4.0));
            let q_hat = sharpen(&q_bar, 0.5).unwrap();
            let route = adt_ssl::losses::gate(&q_bar, &q_hat, tau, &reg).unwrap().route;
            for _ in 0..rng.random_range(1..=2) {
                entries.push(PlanEntry {
                    batch_index: b,
                    input: vec_in(&mut rng),
                    q_bar: q_bar.clone(),
                    q_hat: q_hat.clone(),
                    route,
                });
            }
        }
        let tuples: Vec<SimilarTuple<()>> = entries
            .iter()
            .map(|e| SimilarTuple {
                view: (),
                q_bar: e.q_bar.clone(),
                q_hat: e.q_hat.clone(),
            })
            .collect();
        let pairs = similar_pairs(&tuples, tau, rng.random_range(0.5..0.95)).unwrap();
        let weights = LossWeights::new(
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..3.0),
        )
        .unwrap();
        GradInstance {
            params,
            plan: StepPlan {
                labeled_inputs,
                labels,
                entries,
                similar_pairs: pairs,
                num_classes: c,
                weights,
            },
        }
    }

    pub fn routes(&self) -> [usize; 3] {
        let n = |r: Route| self.plan.entries.iter().filter(|e| e.route == r).count();
        [n(Route::HighConf), n(Route::MidConf), n(Route::Discarded)]
    }

    /// Largest per-coordinate relative error between the analytic gradient
    /// and central differences with step `h`; the denominator is floored at
    /// `floor`.
    pub fn max_rel_error(&self, h: f64, floor: f64) -> f64 {
        let (_, g) = objective(&self.params, &self.plan).unwrap();
        let arch = self.params.arch().clone();
        let base = self.params.values().to_vec();
        let f = |v: Vec<f64>| {
            objective(&ModelParams::from_values(arch.clone(), v).unwrap(), &self.plan)
                .unwrap()
                .0
                .total
        };
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] += h;
            down[i] -= h;
            let numeric = (f(up) - f(down)) / (2.0 * h);
            let a = g.0[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(floor));
        }
        worst
    }
}
