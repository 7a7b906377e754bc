//! Dense tables over sets of binary variables, used as intermediate results by
//! the elimination engines. Scopes are kept sorted by variable id; layout is
//! row-major with the first scope variable most significant.

use crate::model::Factor;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Table {
    scope: Vec<usize>,
    values: Vec<f64>,
}

/// For every position of `outer`, the stride that position contributes to an
/// index into a table over `inner` (zero when the variable is absent).
fn strides(outer: &[usize], inner: &[usize]) -> Vec<usize> {
    outer
        .iter()
        .map(|v| match inner.binary_search(v) {
            Ok(j) => 1usize << (inner.len() - 1 - j),
            Err(_) => 0,
        })
        .collect()
}

#[inline]
fn sub_index(a: usize, len: usize, strides: &[usize]) -> usize {
    let mut idx = 0;
    for (k, &s) in strides.iter().enumerate() {
        if s != 0 && (a >> (len - 1 - k)) & 1 == 1 {
            idx += s;
        }
    }
    idx
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl Table {
    pub fn new(scope: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(values.len(), 1 << scope.len());
        Self { scope, values }
    }

    pub fn ones(scope: Vec<usize>) -> Self {
        let len = 1 << scope.len();
        Self::new(scope, vec![1.0; len])
    }

    /// Converts a model factor, reordering its scope into ascending order.
    pub fn from_factor(f: &Factor) -> Self {
        let mut scope = f.scope().to_vec();
        scope.sort_unstable();
        let len = scope.len();
        let mut values = vec![0.0; 1 << len];
        for (a, slot) in values.iter_mut().enumerate() {
            let mut idx = 0;
            for (k, &v) in f.scope().iter().enumerate() {
                let pos = scope.binary_search(&v).expect("variable in scope");
                if (a >> (len - 1 - pos)) & 1 == 1 {
                    idx += 1 << (f.scope().len() - 1 - k);
                }
            }
            *slot = f.values()[idx];
        }
        Self::new(scope, values)
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Divides by the largest entry and returns it. A table of zeros is left
    /// untouched and `0.0` is returned.
    pub fn normalize_max(&mut self) -> f64 {
        let m = self.max();
        if m > 0.0 {
            self.scale(1.0 / m);
        }
        m
    }

    pub fn powf(&self, e: f64) -> Self {
        Self::new(self.scope.clone(), self.values.iter().map(|v| v.powf(e)).collect())
    }

    pub fn multiply(&self, other: &Table) -> Self {
        Self::product([self, other])
    }

    /// Product of any number of tables over the union of their scopes.
    pub fn product<'a, I>(tables: I) -> Self
    where
        I: IntoIterator<Item = &'a Table>,
    {
        let tables: Vec<&Table> = tables.into_iter().collect();
        let scope = tables.iter().fold(Vec::new(), |acc, t| union(&acc, &t.scope));
        let len = scope.len();
        let all_strides: Vec<Vec<usize>> = tables.iter().map(|t| strides(&scope, &t.scope)).collect();
        let mut values = vec![1.0; 1 << len];
        for (a, slot) in values.iter_mut().enumerate() {
            let mut acc = 1.0;
            for (t, st) in tables.iter().zip(&all_strides) {
                acc *= t.values[sub_index(a, len, st)];
            }
            *slot = acc;
        }
        Self::new(scope, values)
    }

    /// Sums out every variable not in `keep`.
    pub fn marginalize_onto(&self, keep: &[usize]) -> Self {
        let scope: Vec<usize> = self.scope.iter().copied().filter(|v| keep.contains(v)).collect();
        let st = strides(&self.scope, &scope);
        let len = self.scope.len();
        let mut values = vec![0.0; 1 << scope.len()];
        for (a, &v) in self.values.iter().enumerate() {
            values[sub_index(a, len, &st)] += v;
        }
        Self::new(scope, values)
    }

    pub fn sum_out(&self, var: usize) -> Self {
        let keep: Vec<usize> = self.scope.iter().copied().filter(|&v| v != var).collect();
        self.marginalize_onto(&keep)
    }

    /// Unnormalized `(false, true)` mass of one variable in the table.
    pub fn variable_mass(&self, var: usize) -> [f64; 2] {
        let t = self.marginalize_onto(&[var]);
        [t.values[0], t.values[1]]
    }

    /// Elementwise division where `other`'s scope is a subset of this scope.
    /// Entries where the divisor is zero become zero.
    pub fn divide(&self, other: &Table) -> Self {
        let st = strides(&self.scope, &other.scope);
        let len = self.scope.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(a, &v)| {
                let d = other.values[sub_index(a, len, &st)];
                if d == 0.0 {
                    0.0
                } else {
                    v / d
                }
            })
            .collect();
        Self::new(self.scope.clone(), values)
    }
}
