//! Dense tables over small sets of four-state genotype variables.

use crate::genemodel::GenotypeSet;

/// Variable identifier inside an inference network.
pub type Var = usize;

/// Non-negative values over every joint configuration of `scope`, stored
/// row-major with the first scope variable most significant. The represented
/// quantity is `values * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeTable {
    scope: Vec<Var>,
    values: Vec<f64>,
    log_scale: f64,
}

impl GenotypeTable {
    pub fn ones(scope: Vec<Var>) -> Self {
        Self::filled(scope, 1.0)
    }

    pub fn zeros(scope: Vec<Var>) -> Self {
        Self::filled(scope, 0.0)
    }

    fn filled(scope: Vec<Var>, value: f64) -> Self {
        debug_assert!(!has_duplicates(&scope), "duplicate variable in scope");
        let len = 1usize << (2 * scope.len());
        GenotypeTable {
            scope,
            values: vec![value; len],
            log_scale: 0.0,
        }
    }

    pub fn from_values(scope: Vec<Var>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), 1usize << (2 * scope.len()), "table size");
        debug_assert!(!has_duplicates(&scope), "duplicate variable in scope");
        GenotypeTable {
            scope,
            values,
            log_scale: 0.0,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_values(Vec::new(), vec![value])
    }

    pub fn scope(&self) -> &[Var] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the configuration given as one genotype index per scope variable.
    pub fn get(&self, config: &[usize]) -> f64 {
        self.values[flat_index(config)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Natural log of the represented total.
    pub fn log_total(&self) -> f64 {
        self.total().ln() + self.log_scale
    }

    /// Pointwise product with `other`, whose scope must be a subset of ours.
    pub fn multiply_assign(&mut self, other: &GenotypeTable) {
        let strides = self.strides_for(other.scope());
        for (idx, v) in self.values.iter_mut().enumerate() {
            if *v != 0.0 {
                *v *= other.values[project(idx, &strides)];
            }
        }
        self.log_scale += other.log_scale;
    }

    /// Sums out every variable not in `keep` (a subset of the scope); the
    /// result is laid out in the order of `keep`.
    pub fn marginalize_to(&self, keep: &[Var]) -> GenotypeTable {
        let mut out = GenotypeTable::zeros(keep.to_vec());
        let strides = self.strides_for(keep);
        for (idx, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                out.values[project(idx, &strides)] += *v;
            }
        }
        out.log_scale = self.log_scale;
        out
    }

    /// Zeroes configurations where `var` lies outside `allowed`.
    pub fn apply_constraint(&mut self, var: Var, allowed: GenotypeSet) {
        let pos = self
            .scope
            .iter()
            .position(|v| *v == var)
            .expect("variable in scope");
        let shift = 2 * (self.scope.len() - 1 - pos);
        for (idx, v) in self.values.iter_mut().enumerate() {
            let g = (idx >> shift) & 3;
            if allowed.bits() & (1 << g) == 0 {
                *v = 0.0;
            }
        }
    }

    /// Rescales so the largest entry is 1, folding the factor into `log_scale`.
    /// All-zero tables are left untouched.
    pub fn rescale(&mut self) {
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(*v));
        if max > 0.0 && max != 1.0 {
            for v in &mut self.values {
                *v /= max;
            }
            self.log_scale += max.ln();
        }
    }

    /// Values divided by their sum (scale discarded). All-zero stays zero.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        if total > 0.0 {
            self.values.iter().map(|v| v / total).collect()
        } else {
            self.values.clone()
        }
    }

    /// Reorders the scope to `order` (a permutation of it).
    pub fn permuted(&self, order: &[Var]) -> GenotypeTable {
        assert_eq!(order.len(), self.scope.len());
        self.marginalize_to(order)
    }

    // For each target variable (in target order) the shift of its digit in our
    // flat index and the multiplier of that digit in the target's flat index.
    fn strides_for(&self, target: &[Var]) -> Vec<(u32, usize)> {
        let n = self.scope.len();
        let m = target.len();
        target
            .iter()
            .enumerate()
            .map(|(j, var)| {
                let pos = self
                    .scope
                    .iter()
                    .position(|v| v == var)
                    .expect("target scope must be a subset");
                ((2 * (n - 1 - pos)) as u32, 1usize << (2 * (m - 1 - j)))
            })
            .collect()
    }
}

fn project(idx: usize, strides: &[(u32, usize)]) -> usize {
    strides
        .iter()
        .map(|(shift, mult)| ((idx >> shift) & 3) * mult)
        .sum()
}

fn flat_index(config: &[usize]) -> usize {
    config.iter().fold(0, |acc, g| (acc << 2) | (g & 3))
}

fn has_duplicates(scope: &[Var]) -> bool {
    scope
        .iter()
        .enumerate()
        .any(|(i, v)| scope[..i].contains(v))
}
