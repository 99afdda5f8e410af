//! Family structure, personal histories and pedigree file ingestion.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genemodel::{Genotype, GenotypeSet, TestOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "U")]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhenotypeKind {
    /// Diagnosed at `age`.
    Affected,
    /// Free of disease at `age` (right-censored).
    Unaffected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhenotypeEvent {
    pub kind: PhenotypeKind,
    pub age: f64,
}

impl PhenotypeEvent {
    pub fn affected(age: f64) -> Self {
        PhenotypeEvent {
            kind: PhenotypeKind::Affected,
            age,
        }
    }

    pub fn unaffected(age: f64) -> Self {
        PhenotypeEvent {
            kind: PhenotypeKind::Unaffected,
            age,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneticTestResult {
    #[serde(rename = "id")]
    pub individual_id: String,
    #[serde(rename = "result")]
    pub observed: TestOutcome,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    pub sex: Sex,
    pub father: Option<String>,
    pub mother: Option<String>,
    pub phenotype: Option<PhenotypeEvent>,
    pub genotypes: GenotypeSet,
    pub twin_group: Option<String>,
}

impl Individual {
    pub fn new(id: impl Into<String>, sex: Sex) -> Self {
        Individual {
            id: id.into(),
            sex,
            father: None,
            mother: None,
            phenotype: None,
            genotypes: GenotypeSet::ALL,
            twin_group: None,
        }
    }

    pub fn with_parents(mut self, father: impl Into<String>, mother: impl Into<String>) -> Self {
        self.father = Some(father.into());
        self.mother = Some(mother.into());
        self
    }

    pub fn with_phenotype(mut self, phenotype: PhenotypeEvent) -> Self {
        self.phenotype = Some(phenotype);
        self
    }

    pub fn with_genotypes(mut self, allowed: GenotypeSet) -> Self {
        self.genotypes = allowed;
        self
    }

    pub fn with_twin_group(mut self, group: impl Into<String>) -> Self {
        self.twin_group = Some(group.into());
        self
    }

    pub fn is_founder(&self) -> bool {
        self.father.is_none() && self.mother.is_none()
    }
}

/// The schema rule a pedigree violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    DuplicateId,
    SingleParent,
    UnknownReference(String),
    FatherSex(String),
    MotherSex(String),
    SameParent,
    EmptyConstraint,
    CyclicAncestry,
    PhenotypeAge,
    TwinGroupSize(String),
    TwinParents(String),
    TwinCouple(String),
    TestProbability,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::DuplicateId => write!(f, "duplicate id"),
            Rule::SingleParent => write!(f, "single parent (father and mother must both be given or both be null)"),
            Rule::UnknownReference(r) => write!(f, "unknown reference {r:?}"),
            Rule::FatherSex(r) => write!(f, "father {r:?} is recorded as female"),
            Rule::MotherSex(r) => write!(f, "mother {r:?} is recorded as male"),
            Rule::SameParent => write!(f, "father and mother are the same individual"),
            Rule::EmptyConstraint => write!(f, "empty genotype constraint"),
            Rule::CyclicAncestry => write!(f, "cyclic ancestry (individual is its own ancestor)"),
            Rule::PhenotypeAge => write!(f, "phenotype age must be a positive finite number"),
            Rule::TwinGroupSize(g) => write!(f, "twin group {g:?} has fewer than two members"),
            Rule::TwinParents(g) => write!(f, "members of twin group {g:?} have different parents"),
            Rule::TwinCouple(g) => write!(f, "parents belong to the same twin group {g:?}"),
            Rule::TestProbability => write!(f, "test sensitivity and specificity must lie in [0, 1]"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PedigreeError {
    #[error("cannot read pedigree: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed pedigree JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("individual {id:?}: {rule}")]
    Validation { id: String, rule: Rule },
}

impl PedigreeError {
    pub fn rule(&self) -> Option<&Rule> {
        match self {
            PedigreeError::Validation { rule, .. } => Some(rule),
            _ => None,
        }
    }

    fn invalid(id: &str, rule: Rule) -> Self {
        PedigreeError::Validation {
            id: id.to_string(),
            rule,
        }
    }
}

/// A validated pedigree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Pedigree {
    individuals: Vec<Individual>,
    tests: Vec<GeneticTestResult>,
    index: HashMap<String, usize>,
    parents: Vec<Option<(usize, usize)>>,
    order: Vec<usize>,
}

impl Pedigree {
    pub fn new(
        individuals: Vec<Individual>,
        tests: Vec<GeneticTestResult>,
    ) -> Result<Self, PedigreeError> {
        let mut index = HashMap::with_capacity(individuals.len());
        for (k, ind) in individuals.iter().enumerate() {
            if index.insert(ind.id.clone(), k).is_some() {
                return Err(PedigreeError::invalid(&ind.id, Rule::DuplicateId));
            }
        }

        let mut parents = Vec::with_capacity(individuals.len());
        for ind in &individuals {
            let pair = match (&ind.father, &ind.mother) {
                (None, None) => None,
                (Some(fa), Some(mo)) => {
                    let fi = *index
                        .get(fa)
                        .ok_or_else(|| PedigreeError::invalid(&ind.id, Rule::UnknownReference(fa.clone())))?;
                    let mi = *index
                        .get(mo)
                        .ok_or_else(|| PedigreeError::invalid(&ind.id, Rule::UnknownReference(mo.clone())))?;
                    if fi == mi {
                        return Err(PedigreeError::invalid(&ind.id, Rule::SameParent));
                    }
                    if individuals[fi].sex == Sex::Female {
                        return Err(PedigreeError::invalid(&ind.id, Rule::FatherSex(fa.clone())));
                    }
                    if individuals[mi].sex == Sex::Male {
                        return Err(PedigreeError::invalid(&ind.id, Rule::MotherSex(mo.clone())));
                    }
                    Some((fi, mi))
                }
                _ => return Err(PedigreeError::invalid(&ind.id, Rule::SingleParent)),
            };
            parents.push(pair);
            if ind.genotypes.is_empty() {
                return Err(PedigreeError::invalid(&ind.id, Rule::EmptyConstraint));
            }
            if let Some(ph) = &ind.phenotype {
                if !(ph.age.is_finite() && ph.age > 0.0) {
                    return Err(PedigreeError::invalid(&ind.id, Rule::PhenotypeAge));
                }
            }
        }

        let order = topological_order(&parents).map_err(|k| {
            PedigreeError::invalid(&individuals[k].id, Rule::CyclicAncestry)
        })?;

        let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
        for (k, ind) in individuals.iter().enumerate() {
            if let Some(g) = &ind.twin_group {
                groups.entry(g.as_str()).or_default().push(k);
            }
        }
        let mut labels: Vec<&&str> = groups.keys().collect();
        labels.sort();
        for label in labels {
            let members = &groups[*label];
            let first = members[0];
            if members.len() < 2 {
                return Err(PedigreeError::invalid(
                    &individuals[first].id,
                    Rule::TwinGroupSize(label.to_string()),
                ));
            }
            for &m in &members[1..] {
                if parents[m] != parents[first] {
                    return Err(PedigreeError::invalid(
                        &individuals[m].id,
                        Rule::TwinParents(label.to_string()),
                    ));
                }
            }
        }
        for (k, pair) in parents.iter().enumerate() {
            if let Some((fi, mi)) = pair {
                if let (Some(a), Some(b)) = (&individuals[*fi].twin_group, &individuals[*mi].twin_group) {
                    if a == b {
                        return Err(PedigreeError::invalid(
                            &individuals[k].id,
                            Rule::TwinCouple(a.clone()),
                        ));
                    }
                }
            }
        }

        for t in &tests {
            if !index.contains_key(&t.individual_id) {
                return Err(PedigreeError::invalid(
                    &t.individual_id,
                    Rule::UnknownReference(t.individual_id.clone()),
                ));
            }
            let ok = |p: f64| (0.0..=1.0).contains(&p);
            if !ok(t.sensitivity) || !ok(t.specificity) {
                return Err(PedigreeError::invalid(&t.individual_id, Rule::TestProbability));
            }
        }

        Ok(Pedigree {
            individuals,
            tests,
            index,
            parents,
            order,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, PedigreeError> {
        let file: PedigreeFile = serde_json::from_str(s)?;
        file.into_pedigree()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, PedigreeError> {
        let file: PedigreeFile = serde_json::from_value(value)?;
        file.into_pedigree()
    }

    pub fn to_file(&self) -> PedigreeFile {
        PedigreeFile {
            individuals: self.individuals.iter().map(IndividualRecord::from).collect(),
            tests: self.tests.clone(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("pedigree serialises")
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn individual(&self, k: usize) -> &Individual {
        &self.individuals[k]
    }

    pub fn tests(&self) -> &[GeneticTestResult] {
        &self.tests
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// `(father, mother)` positions, `None` for founders.
    pub fn parents(&self, k: usize) -> Option<(usize, usize)> {
        self.parents[k]
    }

    /// Positions ordered so that parents precede their children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn founders(&self) -> Vec<&str> {
        self.individuals
            .iter()
            .filter(|i| i.is_founder())
            .map(|i| i.id.as_str())
            .collect()
    }

    pub fn non_founders(&self) -> Vec<&str> {
        self.individuals
            .iter()
            .filter(|i| !i.is_founder())
            .map(|i| i.id.as_str())
            .collect()
    }

    /// Twin groups as lists of member positions, each in file order.
    pub fn twin_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (k, ind) in self.individuals.iter().enumerate() {
            if let Some(g) = &ind.twin_group {
                match groups.iter_mut().find(|(label, _)| label == g) {
                    Some((_, members)) => members.push(k),
                    None => groups.push((g.clone(), vec![k])),
                }
            }
        }
        groups.into_iter().map(|(_, m)| m).collect()
    }

    /// True when the marriage graph (individuals and matings, joined by
    /// parent and child edges) contains a cycle: inbreeding or a mating loop.
    pub fn has_loop(&self) -> bool {
        let n = self.individuals.len();
        let mut matings: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        for (k, pair) in self.parents.iter().enumerate() {
            if let Some(pair) = pair {
                let next = n + matings.len();
                let node = *matings.entry(*pair).or_insert_with(|| {
                    edges.push((pair.0, next));
                    edges.push((pair.1, next));
                    next
                });
                edges.push((node, k));
            }
        }
        let mut uf = UnionFind::new(n + matings.len());
        edges.into_iter().any(|(a, b)| !uf.union(a, b))
    }

    /// Same family with individual `k`'s phenotype replaced.
    pub fn with_phenotype(&self, k: usize, phenotype: Option<PhenotypeEvent>) -> Pedigree {
        let mut out = self.clone();
        out.individuals[k].phenotype = phenotype;
        out
    }

    /// Same family with individual `k` restricted to `allowed` (intersected
    /// with its existing constraint). May produce impossible evidence.
    pub fn with_constraint(&self, k: usize, allowed: GenotypeSet) -> Pedigree {
        let mut out = self.clone();
        let g = &mut out.individuals[k].genotypes;
        *g = g.intersect(allowed);
        out
    }
}

fn topological_order(parents: &[Option<(usize, usize)>]) -> Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; n];
    for (k, pair) in parents.iter().enumerate() {
        if let Some((f, m)) = pair {
            children[*f].push(k);
            children[*m].push(k);
            pending[k] = 2;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|k| pending[*k] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let k = order[head];
        head += 1;
        for &c in &children[k] {
            pending[c] -= 1;
            if pending[c] == 0 {
                order.push(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let placed: HashSet<usize> = order.into_iter().collect();
        Err((0..n).find(|k| !placed.contains(k)).unwrap_or(0))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// False when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// On-disk pedigree document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedigreeFile {
    pub individuals: Vec<IndividualRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<GeneticTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndividualRecord {
    pub id: String,
    pub sex: Sex,
    #[serde(default)]
    pub father: Option<String>,
    #[serde(default)]
    pub mother: Option<String>,
    #[serde(default)]
    pub phenotype: Option<PhenotypeEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genotypes: Option<Vec<Genotype>>,
    #[serde(default)]
    pub twin_group: Option<String>,
}

impl From<&Individual> for IndividualRecord {
    fn from(ind: &Individual) -> Self {
        IndividualRecord {
            id: ind.id.clone(),
            sex: ind.sex,
            father: ind.father.clone(),
            mother: ind.mother.clone(),
            phenotype: ind.phenotype,
            genotypes: (!ind.genotypes.is_all()).then(|| ind.genotypes.iter().collect()),
            twin_group: ind.twin_group.clone(),
        }
    }
}

impl PedigreeFile {
    pub fn into_pedigree(self) -> Result<Pedigree, PedigreeError> {
        let individuals = self
            .individuals
            .into_iter()
            .map(|r| Individual {
                genotypes: match r.genotypes {
                    None => GenotypeSet::ALL,
                    Some(list) => list.into_iter().collect(),
                },
                id: r.id,
                sex: r.sex,
                father: r.father,
                mother: r.mother,
                phenotype: r.phenotype,
                twin_group: r.twin_group,
            })
            .collect();
        Pedigree::new(individuals, self.tests)
    }
}

/// Reads and validates a pedigree document.
pub fn load_pedigree<R: Read>(mut source: R) -> Result<Pedigree, PedigreeError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    Pedigree::from_json_str(&text)
}
