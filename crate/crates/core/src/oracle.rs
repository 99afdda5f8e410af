//! Reference implementations by exhaustive enumeration and numerical
//! quadrature. Slow; used to cross-check the junction-tree engine and the
//! closed-form risk formulas. Shares only the potential definitions with the
//! main engine.

use rayon::prelude::*;
use thiserror::Error;

use crate::genemodel::{GeneticModel, Genotype};
use crate::inference::{local_likelihood, JointPosterior, PosteriorResult};
use crate::pedigree::Pedigree;
use crate::risk::{posterior_hazard, RiskQuery};
use crate::survival::{DiseaseModel, PiecewiseHazard};

/// Largest family the enumeration accepts (4^12 ≈ 16.8M configurations).
pub const MAX_BRUTE_FORCE_INDIVIDUALS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("brute force is limited to {max} individuals, got {got}")]
    TooLarge { max: usize, got: usize },
}

enum Factor {
    Founder([f64; 4]),
    // [father][mother][child] already multiplied by the child's likelihood
    Child { father: usize, mother: usize, table: Box<[[[f64; 4]; 4]; 4]> },
    // co-twin: likelihood, genotype forced equal to `of`
    Twin { of: usize, local: [f64; 4] },
}

struct Enumeration {
    order: Vec<usize>,
    factors: Vec<Factor>,
    joint_of: Vec<usize>,
}

#[derive(Clone)]
struct Sums {
    evidence: f64,
    marginals: Vec<[f64; 4]>,
    joint: Vec<f64>,
}

impl Sums {
    fn new(n: usize, m: usize) -> Self {
        Sums {
            evidence: 0.0,
            marginals: vec![[0.0; 4]; n],
            joint: vec![0.0; 1 << (2 * m)],
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        self.evidence += other.evidence;
        for (a, b) in self.marginals.iter_mut().zip(&other.marginals) {
            for g in 0..4 {
                a[g] += b[g];
            }
        }
        for (a, b) in self.joint.iter_mut().zip(&other.joint) {
            *a += b;
        }
        self
    }
}

impl Enumeration {
    fn new(pedigree: &Pedigree, genetics: &GeneticModel, disease: &DiseaseModel, joint_of: &[usize]) -> Self {
        let n = pedigree.len();
        let mut twin_rep = vec![None; n];
        for group in pedigree.twin_groups() {
            for &k in &group[1..] {
                twin_rep[k] = Some(group[0]);
            }
        }
        let prior = genetics.founder_prior();
        let factors = (0..n)
            .map(|k| {
                let local = local_likelihood(pedigree, k, genetics, disease);
                if let Some(of) = twin_rep[k] {
                    return Factor::Twin { of, local };
                }
                match pedigree.parents(k) {
                    None => Factor::Founder(std::array::from_fn(|g| prior[g] * local[g])),
                    Some((father, mother)) => {
                        let mut table = Box::new([[[0.0; 4]; 4]; 4]);
                        for gf in Genotype::ALL {
                            for gm in Genotype::ALL {
                                for c in Genotype::ALL {
                                    table[gf.index()][gm.index()][c.index()] =
                                        genetics.transmission(c, gf, gm) * local[c.index()];
                                }
                            }
                        }
                        Factor::Child { father, mother, table }
                    }
                }
            })
            .collect();
        // parents before children; a twin group is emitted as a block, its
        // representative first, where its first member becomes ready
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        let groups = pedigree.twin_groups();
        for &k in pedigree.topological_order() {
            if placed[k] {
                continue;
            }
            let rep = twin_rep[k].unwrap_or(k);
            let block = groups.iter().find(|g| g[0] == rep).cloned().unwrap_or_else(|| vec![k]);
            for j in block {
                placed[j] = true;
                order.push(j);
            }
        }
        Enumeration {
            order,
            factors,
            joint_of: joint_of.to_vec(),
        }
    }

    fn factor(&self, k: usize, g: usize, config: &[usize]) -> f64 {
        match &self.factors[k] {
            Factor::Founder(v) => v[g],
            Factor::Child { father, mother, table } => table[config[*father]][config[*mother]][g],
            Factor::Twin { of, local } => {
                if config[*of] == g {
                    local[g]
                } else {
                    0.0
                }
            }
        }
    }

    fn run(&self) -> Sums {
        let n = self.order.len();
        let m = self.joint_of.len();
        if n == 0 {
            let mut s = Sums::new(0, m);
            s.evidence = 1.0;
            s.joint[0] = 1.0;
            return s;
        }
        let first = self.order[0];
        (0..4usize)
            .into_par_iter()
            .map(|g| {
                let mut sums = Sums::new(n, m);
                let mut config = vec![0usize; n];
                let w = self.factor(first, g, &config);
                if w != 0.0 {
                    config[first] = g;
                    self.descend(1, w, &mut config, &mut sums);
                }
                sums
            })
            .reduce(|| Sums::new(n, m), Sums::merge)
    }

    fn descend(&self, depth: usize, weight: f64, config: &mut [usize], sums: &mut Sums) {
        if depth == self.order.len() {
            sums.evidence += weight;
            for (k, &g) in config.iter().enumerate() {
                sums.marginals[k][g] += weight;
            }
            if !self.joint_of.is_empty() {
                let idx = self.joint_of.iter().fold(0, |acc, k| (acc << 2) | config[*k]);
                sums.joint[idx] += weight;
            }
            return;
        }
        let k = self.order[depth];
        for g in 0..4 {
            let w = self.factor(k, g, config);
            if w != 0.0 {
                config[k] = g;
                self.descend(depth + 1, weight * w, config, sums);
            }
        }
    }
}

fn guard(pedigree: &Pedigree) -> Result<(), OracleError> {
    if pedigree.len() > MAX_BRUTE_FORCE_INDIVIDUALS {
        Err(OracleError::TooLarge {
            max: MAX_BRUTE_FORCE_INDIVIDUALS,
            got: pedigree.len(),
        })
    } else {
        Ok(())
    }
}

/// Evidence and marginals by summing the product of potentials over every
/// genotype configuration.
pub fn brute_force_evidence_and_marginals(
    pedigree: &Pedigree,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
) -> Result<PosteriorResult, OracleError> {
    guard(pedigree)?;
    let sums = Enumeration::new(pedigree, genetics, disease, &[]).run();
    let ids = pedigree.individuals().iter().map(|i| i.id.clone()).collect();
    if sums.evidence <= 0.0 {
        return Ok(PosteriorResult {
            log_evidence: f64::NEG_INFINITY,
            ids,
            marginals: Vec::new(),
            explanation: Some("no genotype configuration is compatible with the observations".to_string()),
            carrier: genetics.carrier(),
        });
    }
    let marginals = sums
        .marginals
        .iter()
        .map(|m| std::array::from_fn(|g| m[g] / sums.evidence))
        .collect();
    Ok(PosteriorResult {
        log_evidence: sums.evidence.ln(),
        ids,
        marginals,
        explanation: None,
        carrier: genetics.carrier(),
    })
}

/// Joint posterior of the given individuals by enumeration. `None` when the
/// evidence is zero.
pub fn brute_force_joint(
    pedigree: &Pedigree,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
    individuals: &[usize],
) -> Result<Option<JointPosterior>, OracleError> {
    guard(pedigree)?;
    let sums = Enumeration::new(pedigree, genetics, disease, individuals).run();
    if sums.evidence <= 0.0 {
        return Ok(None);
    }
    Ok(Some(JointPosterior {
        ids: individuals.iter().map(|k| pedigree.individual(*k).id.clone()).collect(),
        probabilities: sums.joint.iter().map(|v| v / sums.evidence).collect(),
    }))
}

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

// integration pieces between consecutive cuts so the integrand is smooth on each
fn pieces(cuts: impl Iterator<Item = f64>, a: f64, b: f64) -> Vec<f64> {
    let mut points: Vec<f64> = cuts.filter(|c| *c > a && *c < b).collect();
    points.push(a);
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// `∫_τ^t α(u) exp(-∫_τ^u β) du` by adaptive Simpson on each interval of
/// constant rates, tolerance 1e-10 overall.
pub fn quadrature_incidence(alpha: &PiecewiseHazard, beta: &PiecewiseHazard, tau: f64, t: f64) -> f64 {
    if t <= tau {
        return 0.0;
    }
    let points = pieces(
        alpha.breakpoints().iter().chain(beta.breakpoints()).copied(),
        tau,
        t,
    );
    let b_tau = beta.cumulative_hazard(tau);
    let tol = 1e-10 / points.len() as f64;
    points
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let a_rate = alpha.rate_at(mid);
            // evaluate the hazard inside the open interval so endpoint
            // conventions do not matter
            let f = |u: f64| a_rate * (-(beta.cumulative_hazard(u) - b_tau)).exp();
            adaptive_simpson(&f, w[0], w[1], tol)
        })
        .sum()
}

/// `exp(-∫_τ^t λ(u) du)` with the posterior hazard integrated numerically.
pub fn quadrature_survival(q: &RiskQuery, t: f64) -> f64 {
    let cuts = q
        .disease
        .carrier
        .breakpoints()
        .iter()
        .chain(q.disease.noncarrier.breakpoints())
        .copied();
    let points = pieces(cuts, q.tau, t);
    let tol = 1e-12 / points.len().max(1) as f64;
    let integral: f64 = points
        .windows(2)
        .map(|w| {
            let f = |u: f64| {
                // keep the endpoints on the interval's own rate
                let u = u.clamp(w[0] + 1e-12 * (w[1] - w[0]), w[1]);
                posterior_hazard(q, u).expect("u >= tau")
            };
            adaptive_simpson(&f, w[0], w[1], tol)
        })
        .sum();
    (-integral).exp()
}
