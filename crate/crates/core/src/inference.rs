//! Potentials and forward/backward belief propagation on a junction tree.
//!
//! Each individual contributes one potential: its phenotype likelihood times
//! either the founder prior or the transmission from its parents. Monozygous
//! twins share a single genotype variable; the first listed twin carries the
//! transmission term and the others contribute their likelihood only.

use serde::Serialize;
use thiserror::Error;

use crate::genemodel::{test_likelihood, CarrierPredicate, GeneticModel, Genotype, GenotypeSet};
use crate::jtree::{EliminationHeuristic, JunctionTree, MinFill, Skeleton, TreeSummary};
use crate::pedigree::{Pedigree, PhenotypeEvent, PhenotypeKind};
use crate::survival::DiseaseModel;
use crate::table::{GenotypeTable, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("unknown individual {0:?}")]
    UnknownIndividual(String),
    #[error("impossible family history: {0}")]
    Impossible(String),
    #[error("joint posterior supports at most {max} individuals, got {got}")]
    TooManyIndividuals { max: usize, got: usize },
}

/// `P(PH | X = g)` for every genotype: density for an affected individual,
/// survival for a censored one, 1 without phenotype.
pub fn phenotype_likelihood(
    phenotype: Option<&PhenotypeEvent>,
    carrier: CarrierPredicate,
    disease: &DiseaseModel,
) -> [f64; 4] {
    let mut out = [1.0; 4];
    if let Some(ph) = phenotype {
        for g in Genotype::ALL {
            let h = disease.hazard(carrier.is_carrier(g));
            out[g.index()] = match ph.kind {
                PhenotypeKind::Affected => h.density(ph.age),
                PhenotypeKind::Unaffected => h.survival(ph.age),
            };
        }
    }
    out
}

/// Everything individual `k` contributes besides the genetic prior or
/// transmission: phenotype likelihood, allowed genotypes (own constraint and
/// lethal genotypes) and genetic test likelihoods.
pub fn local_likelihood(
    pedigree: &Pedigree,
    k: usize,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
) -> [f64; 4] {
    let ind = pedigree.individual(k);
    let mut out = phenotype_likelihood(ind.phenotype.as_ref(), genetics.carrier(), disease);
    let allowed = ind.genotypes.intersect(genetics.viable());
    for g in Genotype::ALL {
        if !allowed.contains(g) {
            out[g.index()] = 0.0;
        }
    }
    for t in pedigree.tests().iter().filter(|t| t.individual_id == ind.id) {
        let lik = test_likelihood(t.observed, t.sensitivity, t.specificity, genetics.carrier());
        for (o, l) in out.iter_mut().zip(lik) {
            *o *= l;
        }
    }
    out
}

/// Maps each individual to its genotype variable, aliasing twin groups.
pub fn variable_map(pedigree: &Pedigree) -> (Vec<Var>, usize) {
    let n = pedigree.len();
    let mut var_of = vec![usize::MAX; n];
    for group in pedigree.twin_groups() {
        for &k in &group[1..] {
            var_of[k] = group[0];
        }
    }
    let mut next = 0;
    let mut dense = vec![usize::MAX; n];
    for k in 0..n {
        if var_of[k] == usize::MAX {
            dense[k] = next;
            next += 1;
        }
    }
    for k in 0..n {
        var_of[k] = if var_of[k] == usize::MAX { dense[k] } else { dense[var_of[k]] };
    }
    (var_of, next)
}

/// One potential per individual, in pedigree order.
pub fn build_potentials(
    pedigree: &Pedigree,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
) -> Vec<GenotypeTable> {
    let (var_of, _) = variable_map(pedigree);
    let mut is_secondary_twin = vec![false; pedigree.len()];
    for group in pedigree.twin_groups() {
        for &k in &group[1..] {
            is_secondary_twin[k] = true;
        }
    }
    let prior = genetics.founder_prior();
    (0..pedigree.len())
        .map(|k| {
            let local = local_likelihood(pedigree, k, genetics, disease);
            let v = var_of[k];
            if is_secondary_twin[k] {
                return GenotypeTable::from_values(vec![v], local.to_vec());
            }
            match pedigree.parents(k) {
                None => {
                    let values = Genotype::ALL
                        .iter()
                        .map(|g| prior[g.index()] * local[g.index()])
                        .collect();
                    GenotypeTable::from_values(vec![v], values)
                }
                Some((f, m)) => {
                    let mut values = Vec::with_capacity(64);
                    for c in Genotype::ALL {
                        for gf in Genotype::ALL {
                            for gm in Genotype::ALL {
                                values.push(genetics.transmission(c, gf, gm) * local[c.index()]);
                            }
                        }
                    }
                    GenotypeTable::from_values(vec![v, var_of[f], var_of[m]], values)
                }
            }
        })
        .collect()
}

/// Result of one forward/backward sweep.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// ln P(FH); `-inf` when the observations are impossible.
    pub log_evidence: f64,
    /// Normalised clique beliefs `P(C_k | FH)`; empty when impossible.
    pub beliefs: Vec<GenotypeTable>,
}

/// Runs one forward and one backward sweep. `potentials[i]` is placed in
/// clique `jt.of(i)`.
pub fn propagate(jt: &JunctionTree, potentials: &[GenotypeTable]) -> Propagation {
    let k_total = jt.len();
    if k_total == 0 {
        return Propagation {
            log_evidence: 0.0,
            beliefs: Vec::new(),
        };
    }
    let phi: Vec<GenotypeTable> = (0..k_total)
        .map(|k| {
            let mut t = GenotypeTable::ones(jt.clique(k).to_vec());
            for &i in jt.starred(k) {
                t.multiply_assign(&potentials[i]);
            }
            t
        })
        .collect();

    let mut forward: Vec<GenotypeTable> = Vec::with_capacity(k_total);
    let mut upward: Vec<GenotypeTable> = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut m = phi[k].clone();
        for &j in jt.from(k) {
            m.multiply_assign(&forward[j]);
        }
        let mut f = m.marginalize_to(jt.separator(k));
        f.rescale();
        forward.push(f);
        upward.push(m);
    }
    let root = jt.root();
    let evidence = forward[root].total();
    if evidence <= 0.0 || !evidence.is_finite() {
        return Propagation {
            log_evidence: f64::NEG_INFINITY,
            beliefs: Vec::new(),
        };
    }
    let log_evidence = evidence.ln() + forward[root].log_scale();

    let mut backward: Vec<Option<GenotypeTable>> = vec![None; k_total];
    backward[root] = Some(GenotypeTable::scalar(1.0));
    for k in (0..k_total).rev() {
        let bk = backward[k].clone().expect("parent processed first");
        for &i in jt.from(k) {
            let mut t = phi[k].clone();
            for &j in jt.from(k) {
                if j != i {
                    t.multiply_assign(&forward[j]);
                }
            }
            t.multiply_assign(&bk);
            let mut b = t.marginalize_to(jt.separator(i));
            b.rescale();
            backward[i] = Some(b);
        }
    }
    let backward: Vec<GenotypeTable> = backward.into_iter().map(|b| b.expect("all set")).collect();

    if cfg!(debug_assertions) {
        check_separator_consistency(jt, &forward, &backward, log_evidence);
    }

    let beliefs = upward
        .into_iter()
        .zip(&backward)
        .map(|(mut m, b)| {
            m.multiply_assign(b);
            let scope = m.scope().to_vec();
            GenotypeTable::from_values(scope, m.normalized())
        })
        .collect();
    Propagation {
        log_evidence,
        beliefs,
    }
}

// Σ_{S_j} F_j B_j = P(FH) on every separator.
fn check_separator_consistency(
    jt: &JunctionTree,
    forward: &[GenotypeTable],
    backward: &[GenotypeTable],
    log_evidence: f64,
) {
    for j in 0..jt.len() {
        let f = &forward[j];
        let b = backward[j].permuted(f.scope());
        let dot: f64 = f.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        let log_joint = dot.ln() + f.log_scale() + b.log_scale();
        debug_assert!(
            (log_joint - log_evidence).abs() < 1e-8 * log_evidence.abs().max(1.0),
            "separator {j}: {log_joint} vs {log_evidence}"
        );
    }
}

/// A pedigree compiled into potentials over genotype variables plus a
/// junction tree over those variables.
#[derive(Debug, Clone)]
pub struct Network {
    ids: Vec<String>,
    var_of: Vec<Var>,
    n_vars: usize,
    potentials: Vec<GenotypeTable>,
    skeleton: Skeleton,
    tree: JunctionTree,
    carrier: CarrierPredicate,
}

impl Network {
    pub fn new(pedigree: &Pedigree, genetics: &GeneticModel, disease: &DiseaseModel) -> Self {
        Self::with_heuristic(pedigree, genetics, disease, &MinFill)
    }

    pub fn with_heuristic<H: EliminationHeuristic>(
        pedigree: &Pedigree,
        genetics: &GeneticModel,
        disease: &DiseaseModel,
        heuristic: &H,
    ) -> Self {
        let (var_of, n_vars) = variable_map(pedigree);
        let potentials = build_potentials(pedigree, genetics, disease);
        let skeleton = Skeleton::new(n_vars, potentials.iter().map(|p| p.scope().to_vec()).collect());
        let tree = JunctionTree::with_heuristic(&skeleton, heuristic);
        debug_assert_eq!(tree.check(&skeleton), Ok(()));
        Network {
            ids: pedigree.individuals().iter().map(|i| i.id.clone()).collect(),
            var_of,
            n_vars,
            potentials,
            skeleton,
            tree,
            carrier: genetics.carrier(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn tree(&self) -> &JunctionTree {
        &self.tree
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn potentials(&self) -> &[GenotypeTable] {
        &self.potentials
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn var_of(&self, k: usize) -> Var {
        self.var_of[k]
    }

    /// Junction-tree diagnostics with variables named by individual id; twins
    /// sharing a variable are joined with `=`.
    pub fn tree_summary(&self) -> TreeSummary {
        self.tree.summary(|v| {
            self.ids
                .iter()
                .zip(&self.var_of)
                .filter(|(_, x)| **x == v)
                .map(|(id, _)| id.as_str())
                .collect::<Vec<_>>()
                .join("=")
        })
    }

    pub fn index_of(&self, id: &str) -> Result<usize, InferenceError> {
        self.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| InferenceError::UnknownIndividual(id.to_string()))
    }

    /// Copy of the network with individual `k` fixed to `g`.
    pub fn clamped(&self, k: usize, g: Genotype) -> Network {
        let mut out = self.clone();
        let v = self.var_of[k];
        out.potentials[k].apply_constraint(v, GenotypeSet::only(g));
        out
    }

    pub fn propagate(&self) -> Propagation {
        propagate(&self.tree, &self.potentials)
    }

    pub fn posterior(&self) -> PosteriorResult {
        self.posterior_from(&self.propagate())
    }

    /// Posterior read from an existing propagation of this network.
    pub fn posterior_from(&self, prop: &Propagation) -> PosteriorResult {
        if prop.log_evidence == f64::NEG_INFINITY {
            return PosteriorResult {
                log_evidence: f64::NEG_INFINITY,
                ids: self.ids.clone(),
                marginals: Vec::new(),
                explanation: Some(self.explain_impossible()),
                carrier: self.carrier,
            };
        }
        let marginals = (0..self.ids.len())
            .map(|k| {
                let belief = &prop.beliefs[self.tree.of(k)];
                let m = belief.marginalize_to(&[self.var_of[k]]);
                let mut out = [0.0; 4];
                out.copy_from_slice(&m.normalized());
                out
            })
            .collect();
        PosteriorResult {
            log_evidence: prop.log_evidence,
            ids: self.ids.clone(),
            marginals,
            explanation: None,
            carrier: self.carrier,
        }
    }

    fn explain_impossible(&self) -> String {
        for (k, pot) in self.potentials.iter().enumerate() {
            if pot.values().iter().all(|v| *v == 0.0) {
                return format!(
                    "individual {:?}: the observations exclude every allowed genotype (for example an affected individual restricted to genotypes with zero hazard at the diagnosis age)",
                    self.ids[k]
                );
            }
        }
        "the genotype constraints, tests and phenotypes cannot all hold under Mendelian transmission".to_string()
    }

    /// Joint posterior read off a clique belief, when one clique holds every
    /// requested individual's variable.
    pub fn joint_from_clique(&self, prop: &Propagation, individuals: &[usize]) -> Option<JointPosterior> {
        if prop.beliefs.is_empty() {
            return None;
        }
        let vars = self.unique_vars(individuals);
        let k = (0..self.tree.len()).find(|k| vars.iter().all(|v| self.tree.clique(*k).contains(v)))?;
        let table = prop.beliefs[k].marginalize_to(&vars);
        Some(self.expand(individuals, &vars, |config| table.get(config)))
    }

    /// Joint posterior by clamping all but one of the variables to each of
    /// their configurations and re-propagating: `4^(m-1)` sweeps.
    pub fn joint_by_clamping(&self, individuals: &[usize]) -> Result<JointPosterior, InferenceError> {
        let base = self.propagate();
        if base.log_evidence == f64::NEG_INFINITY {
            return Err(InferenceError::Impossible(self.explain_impossible()));
        }
        let vars = self.unique_vars(individuals);
        let m = vars.len();
        let (clamp_vars, last) = vars.split_at(m - 1);
        let rep = |v: Var| self.var_of.iter().position(|x| *x == v).expect("variable has an individual");
        let mut joint = vec![0.0; 1 << (2 * m)];
        for combo in 0..(1usize << (2 * (m - 1))) {
            let mut net = self.clone();
            for (pos, v) in clamp_vars.iter().enumerate() {
                let g = (combo >> (2 * (m - 2 - pos))) & 3;
                net = net.clamped(rep(*v), Genotype::from_index(g));
            }
            let prop = net.propagate();
            if prop.log_evidence == f64::NEG_INFINITY {
                continue;
            }
            let weight = (prop.log_evidence - base.log_evidence).exp();
            let last_k = rep(last[0]);
            let marg = prop.beliefs[net.tree.of(last_k)].marginalize_to(last).normalized();
            for (g, p) in marg.iter().enumerate() {
                joint[(combo << 2) | g] = weight * p;
            }
        }
        let table = GenotypeTable::from_values(vars.clone(), joint);
        Ok(self.expand(individuals, &vars, |config| table.get(config)))
    }

    /// Joint posterior of up to three individuals: from a clique when they
    /// share one, by clamping otherwise.
    pub fn joint_posterior(&self, individuals: &[usize]) -> Result<JointPosterior, InferenceError> {
        if individuals.len() > 3 {
            return Err(InferenceError::TooManyIndividuals {
                max: 3,
                got: individuals.len(),
            });
        }
        let prop = self.propagate();
        if prop.log_evidence == f64::NEG_INFINITY {
            return Err(InferenceError::Impossible(self.explain_impossible()));
        }
        match self.joint_from_clique(&prop, individuals) {
            Some(j) => Ok(j),
            None => self.joint_by_clamping(individuals),
        }
    }

    fn unique_vars(&self, individuals: &[usize]) -> Vec<Var> {
        let mut vars = Vec::new();
        for &k in individuals {
            let v = self.var_of[k];
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars
    }

    // Lays a joint over distinct variables out over the requested individuals;
    // aliased twins get a diagonal.
    fn expand(&self, individuals: &[usize], vars: &[Var], value: impl Fn(&[usize]) -> f64) -> JointPosterior {
        let m = individuals.len();
        let mut probabilities = vec![0.0; 1 << (2 * m)];
        let mut var_config = vec![0usize; vars.len()];
        for (idx, p) in probabilities.iter_mut().enumerate() {
            let mut consistent = true;
            let mut seen = vec![None; vars.len()];
            for (pos, &k) in individuals.iter().enumerate() {
                let g = (idx >> (2 * (m - 1 - pos))) & 3;
                let vpos = vars.iter().position(|v| *v == self.var_of[k]).unwrap();
                match seen[vpos] {
                    Some(prev) if prev != g => consistent = false,
                    _ => seen[vpos] = Some(g),
                }
                var_config[vpos] = g;
            }
            if consistent {
                *p = value(&var_config);
            }
        }
        JointPosterior {
            ids: individuals.iter().map(|k| self.ids[*k].clone()).collect(),
            probabilities,
        }
    }
}

/// Joint genotype posterior over a few individuals, row-major with the first
/// individual most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    pub ids: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl JointPosterior {
    pub fn get(&self, genotypes: &[Genotype]) -> f64 {
        let idx = genotypes.iter().fold(0, |acc, g| (acc << 2) | g.index());
        self.probabilities[idx]
    }

    /// Marginal of the individual at `pos`.
    pub fn marginal(&self, pos: usize) -> [f64; 4] {
        let m = self.ids.len();
        let mut out = [0.0; 4];
        for (idx, p) in self.probabilities.iter().enumerate() {
            out[(idx >> (2 * (m - 1 - pos))) & 3] += p;
        }
        out
    }

    /// Collapses every individual to carrier / non-carrier; index bit set
    /// means carrier, first individual most significant.
    pub fn carrier_joint(&self, carrier: CarrierPredicate) -> Vec<f64> {
        let m = self.ids.len();
        let mut out = vec![0.0; 1 << m];
        for (idx, p) in self.probabilities.iter().enumerate() {
            let mut c = 0;
            for pos in 0..m {
                let g = Genotype::from_index((idx >> (2 * (m - 1 - pos))) & 3);
                c = (c << 1) | carrier.is_carrier(g) as usize;
            }
            out[c] += p;
        }
        out
    }
}

/// Evidence and per-individual genotype marginals.
#[derive(Debug, Clone)]
pub struct PosteriorResult {
    pub log_evidence: f64,
    pub ids: Vec<String>,
    /// Indexed like the pedigree; empty when the evidence is impossible.
    pub marginals: Vec<[f64; 4]>,
    pub explanation: Option<String>,
    pub carrier: CarrierPredicate,
}

impl PosteriorResult {
    pub fn is_impossible(&self) -> bool {
        self.log_evidence == f64::NEG_INFINITY
    }

    pub fn marginal(&self, id: &str) -> Option<[f64; 4]> {
        let k = self.ids.iter().position(|x| x == id)?;
        self.marginals.get(k).copied()
    }

    pub fn carrier_probability(&self, k: usize) -> f64 {
        Genotype::ALL
            .iter()
            .filter(|g| self.carrier.is_carrier(**g))
            .map(|g| self.marginals[k][g.index()])
            .sum()
    }

    pub fn report(&self) -> PosteriorReport {
        PosteriorReport {
            log_evidence: self.log_evidence.is_finite().then_some(self.log_evidence),
            marginals: self
                .ids
                .iter()
                .zip(&self.marginals)
                .map(|(id, m)| {
                    (
                        id.clone(),
                        GenotypeProbabilities {
                            g00: m[0],
                            g01: m[1],
                            g10: m[2],
                            g11: m[3],
                        },
                    )
                })
                .collect(),
            explanation: self.explanation.clone(),
        }
    }
}

/// JSON form: `{"log_evidence": x, "marginals": {id: {"00": p, ...}}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub log_evidence: Option<f64>,
    pub marginals: indexmap_lite::OrderedMap<GenotypeProbabilities>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenotypeProbabilities {
    #[serde(rename = "00")]
    pub g00: f64,
    #[serde(rename = "01")]
    pub g01: f64,
    #[serde(rename = "10")]
    pub g10: f64,
    #[serde(rename = "11")]
    pub g11: f64,
}

/// Insertion-ordered string map that serialises as a JSON object.
pub mod indexmap_lite {
    use serde::ser::{Serialize, SerializeMap, Serializer};

    #[derive(Debug, Clone, PartialEq, Default)]
    pub struct OrderedMap<V>(pub Vec<(String, V)>);

    impl<V> FromIterator<(String, V)> for OrderedMap<V> {
        fn from_iter<I: IntoIterator<Item = (String, V)>>(iter: I) -> Self {
            OrderedMap(iter.into_iter().collect())
        }
    }

    impl<V> OrderedMap<V> {
        pub fn get(&self, key: &str) -> Option<&V> {
            self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
        }
    }

    impl<V: Serialize> Serialize for OrderedMap<V> {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            let mut map = serializer.serialize_map(Some(self.0.len()))?;
            for (k, v) in &self.0 {
                map.serialize_entry(k, v)?;
            }
            map.end()
        }
    }
}

/// `P(X_k ≠ 00 | FH with individual k's own history replaced by T_k > τ)`.
pub fn carrier_probability_at(
    pedigree: &Pedigree,
    k: usize,
    tau: f64,
    genetics: &GeneticModel,
    disease: &DiseaseModel,
) -> Result<f64, InferenceError> {
    let phenotype = (tau > 0.0).then(|| PhenotypeEvent::unaffected(tau));
    let altered = pedigree.with_phenotype(k, phenotype);
    let post = Network::new(&altered, genetics, disease).posterior();
    if post.is_impossible() {
        return Err(InferenceError::Impossible(
            post.explanation.unwrap_or_default(),
        ));
    }
    Ok(post.carrier_probability(k))
}
