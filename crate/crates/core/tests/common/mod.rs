#![allow(dead_code)]

use pedrisk::genemodel::TestOutcome;
use pedrisk::pedigree::GeneticTestResult;
use pedrisk::survival::builtin_claus_easton;
use pedrisk::{DiseaseModel, GeneticModel, Genotype, GenotypeSet, Individual, Pedigree, PhenotypeEvent, PiecewiseHazard, Sex};
use rand::rngs::StdRng;
use rand::Rng;

pub fn claus_easton() -> (GeneticModel, DiseaseModel) {
    let (dm, f) = builtin_claus_easton();
    (GeneticModel::new(f).unwrap(), dm)
}

pub fn load(json: &str) -> Pedigree {
    Pedigree::from_json_str(json).unwrap()
}

pub const LOOP_FAMILY: &str = include_str!("../../data/loop_family.json");
pub const FH: [&str; 6] = [
    include_str!("../../data/fh1.json"),
    include_str!("../../data/fh2.json"),
    include_str!("../../data/fh3.json"),
    include_str!("../../data/fh4.json"),
    include_str!("../../data/fh5.json"),
    include_str!("../../data/fh6.json"),
];

/// Piecewise-constant hazard with 1 to 5 random cuts in [0, 100) and rates
/// up to `max_rate`.
pub fn random_hazard(rng: &mut StdRng, max_rate: f64) -> PiecewiseHazard {
    let k = rng.gen_range(1..=5);
    let mut cuts: Vec<f64> = (0..k).map(|_| (rng.gen_range(0.0..100.0f64) * 4.0).round() / 4.0).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rates = (1..cuts.len()).map(|_| rng.gen_range(0.0..max_rate)).collect();
    let pre = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..max_rate) };
    PiecewiseHazard::new(cuts, rates, pre, rng.gen_range(0.0..max_rate)).unwrap()
}

/// Random genetic and disease model. Allele frequencies are large enough for
/// carriers to matter numerically; carriers get the larger hazards half of
/// the time.
pub fn random_model(rng: &mut StdRng) -> (GeneticModel, DiseaseModel) {
    if rng.gen_bool(0.25) {
        return claus_easton();
    }
    let mut gm = GeneticModel::new(rng.gen_range(0.01..0.3)).unwrap();
    if rng.gen_bool(0.1) {
        gm = gm.with_lethal(GenotypeSet::only(Genotype::G11)).unwrap();
    }
    let dm = DiseaseModel::new(random_hazard(rng, 0.02), random_hazard(rng, 0.08));
    (gm, dm)
}

fn random_sex(rng: &mut StdRng) -> Sex {
    match rng.gen_range(0..10) {
        0 => Sex::Unknown,
        1..=5 => Sex::Female,
        _ => Sex::Male,
    }
}

fn random_phenotype(rng: &mut StdRng) -> Option<PhenotypeEvent> {
    if rng.gen_bool(0.4) {
        return None;
    }
    let age = (rng.gen_range(1.0..95.0f64) * 10.0).round() / 10.0;
    Some(if rng.gen_bool(0.4) {
        PhenotypeEvent::affected(age)
    } else {
        PhenotypeEvent::unaffected(age)
    })
}

fn random_constraint(rng: &mut StdRng) -> GenotypeSet {
    loop {
        let s = GenotypeSet::from_bits(rng.gen_range(1..16));
        if !s.is_empty() {
            return s;
        }
    }
}

/// Options for [`random_pedigree`].
#[derive(Clone, Copy)]
pub struct Shape {
    pub max_n: usize,
    pub twins: bool,
    pub constraints: bool,
    pub tests: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_n: 8,
            twins: true,
            constraints: true,
            tests: true,
        }
    }
}

/// Random pedigree: parents drawn from any earlier individuals, so inbreeding
/// and mating loops arise often. Twins copy an earlier individual's parents
/// and sex.
pub fn random_pedigree(rng: &mut StdRng, shape: Shape) -> Pedigree {
    let n = rng.gen_range(1..=shape.max_n);
    let mut inds: Vec<Individual> = Vec::with_capacity(n);
    let mut twin_groups = 0;
    for k in 0..n {
        let id = format!("i{k}");
        if shape.twins && k > 0 && rng.gen_bool(0.12) {
            let j = rng.gen_range(0..k);
            let group = match &inds[j].twin_group {
                Some(g) => g.clone(),
                None => {
                    twin_groups += 1;
                    let g = format!("t{twin_groups}");
                    inds[j].twin_group = Some(g.clone());
                    g
                }
            };
            let mut twin = Individual::new(id, inds[j].sex);
            twin.father = inds[j].father.clone();
            twin.mother = inds[j].mother.clone();
            twin.twin_group = Some(group);
            inds.push(twin);
            continue;
        }
        let mut ind = Individual::new(id, random_sex(rng));
        let fathers: Vec<usize> = (0..k).filter(|j| inds[*j].sex == Sex::Male).collect();
        let mothers: Vec<usize> = (0..k).filter(|j| inds[*j].sex == Sex::Female).collect();
        if !fathers.is_empty() && !mothers.is_empty() && rng.gen_bool(0.75) {
            let f = fathers[rng.gen_range(0..fathers.len())];
            let m = mothers[rng.gen_range(0..mothers.len())];
            let same_group = inds[f].twin_group.is_some() && inds[f].twin_group == inds[m].twin_group;
            if !same_group {
                ind = ind.with_parents(inds[f].id.clone(), inds[m].id.clone());
            }
        }
        inds.push(ind);
    }
    let mut tests = Vec::new();
    for ind in inds.iter_mut() {
        ind.phenotype = random_phenotype(rng);
        if shape.constraints && rng.gen_bool(0.15) {
            ind.genotypes = random_constraint(rng);
        }
        if shape.tests && rng.gen_bool(0.15) {
            tests.push(GeneticTestResult {
                individual_id: ind.id.clone(),
                observed: if rng.gen_bool(0.5) { TestOutcome::Positive } else { TestOutcome::Negative },
                sensitivity: rng.gen_range(0.5..=1.0),
                specificity: rng.gen_range(0.5..=1.0),
            });
        }
    }
    Pedigree::new(inds, tests).expect("generator builds valid pedigrees")
}

/// Random loopless pedigree of exactly `n` individuals: every child has one
/// parent already in the family and a new founder spouse (or reuses that
/// parent's existing spouse). Returns a (grandparent, parent, child) chain
/// when one exists.
pub fn random_loopless(rng: &mut StdRng, n: usize, with_data: bool) -> (Pedigree, Option<(usize, usize, usize)>) {
    let mut inds: Vec<Individual> = vec![Individual::new("p0", Sex::Female)];
    let mut spouse_of: Vec<Option<usize>> = vec![None];
    while inds.len() < n {
        let k = inds.len();
        let parent = rng.gen_range(0..k);
        if inds[parent].sex == Sex::Unknown || n - k < 2 && spouse_of[parent].is_none() {
            // a new spouse would not fit; add a founder instead
            inds.push(Individual::new(format!("p{k}"), random_sex(rng)));
            spouse_of.push(None);
            continue;
        }
        let spouse = match spouse_of[parent] {
            Some(s) => s,
            None => {
                let sex = if inds[parent].sex == Sex::Male { Sex::Female } else { Sex::Male };
                inds.push(Individual::new(format!("p{}", inds.len()), sex));
                spouse_of.push(Some(parent));
                spouse_of[parent] = Some(inds.len() - 1);
                inds.len() - 1
            }
        };
        let (f, m) = if inds[parent].sex == Sex::Male { (parent, spouse) } else { (spouse, parent) };
        let child = Individual::new(format!("p{}", inds.len()), random_sex(rng))
            .with_parents(inds[f].id.clone(), inds[m].id.clone());
        inds.push(child);
        spouse_of.push(None);
    }
    if with_data {
        for ind in inds.iter_mut() {
            ind.phenotype = random_phenotype(rng);
        }
    }
    let p = Pedigree::new(inds, vec![]).expect("generator builds valid pedigrees");
    let mut chain = None;
    for c in 0..p.len() {
        if let Some((f, m)) = p.parents(c) {
            for parent in [f, m] {
                if let Some((gf, gm)) = p.parents(parent) {
                    chain = Some((if rng.gen_bool(0.5) { gf } else { gm }, parent, c));
                }
            }
        }
    }
    (p, chain)
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact zeros required to agree.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
