use crate::error::{Error, Result};

/// All monomials of total degree `1..=degree` over `n` inputs, cross terms
/// included. Terms are ordered by degree, then lexicographically by their
/// sorted index multiset, so `(x, y)` at degree 2 gives `x, y, x^2, x*y, y^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialExpansion {
    n_inputs: usize,
    degree: usize,
    terms: Vec<Vec<usize>>,
}

impl PolynomialExpansion {
    pub fn new(n_inputs: usize, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        let mut terms = Vec::new();
        let mut current = Vec::with_capacity(degree);
        for d in 1..=degree {
            push_combinations(n_inputs, d, 0, &mut current, &mut terms);
        }
        Ok(PolynomialExpansion {
            n_inputs,
            degree,
            terms,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn names(&self, inputs: &[String]) -> Result<Vec<String>> {
        if inputs.len() != self.n_inputs {
            return Err(Error::LengthMismatch {
                left: self.n_inputs,
                right: inputs.len(),
            });
        }
        Ok(self.terms.iter().map(|t| term_name(t, inputs)).collect())
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_inputs {
            return Err(Error::LengthMismatch {
                left: self.n_inputs,
                right: row.len(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.iter().map(|&i| row[i]).product())
            .collect())
    }

    pub fn apply_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

fn push_combinations(
    n: usize,
    remaining: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for i in start..n {
        current.push(i);
        push_combinations(n, remaining - 1, i, current, out);
        current.pop();
    }
}

fn term_name(term: &[usize], inputs: &[String]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < term.len() {
        let mut j = i;
        while j < term.len() && term[j] == term[i] {
            j += 1;
        }
        let name = &inputs[term[i]];
        parts.push(match j - i {
            1 => name.clone(),
            p => format!("{name}^{p}"),
        });
        i = j;
    }
    parts.join("*")
}

/// One-shot expansion of a single row.
pub fn expand_polynomial(
    features: &[f64],
    names: &[String],
    degree: usize,
) -> Result<(Vec<f64>, Vec<String>)> {
    let exp = PolynomialExpansion::new(features.len(), degree)?;
    Ok((exp.apply(features)?, exp.names(names)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_inputs_degree_two() {
        let names = vec!["x".to_string(), "y".to_string()];
        let (v, n) = expand_polynomial(&[2.0, 3.0], &names, 2).unwrap();
        assert_eq!(n, vec!["x", "y", "x^2", "x*y", "y^2"]);
        assert_eq!(v, vec![2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    #[test]
    fn degree_one_is_identity() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let (v, n) = expand_polynomial(&[1.5, -2.0, 7.0], &names, 1).unwrap();
        assert_eq!(v, vec![1.5, -2.0, 7.0]);
        assert_eq!(n, names);
    }

    #[test]
    fn degree_three_names() {
        let names = vec!["x".to_string(), "y".to_string()];
        let e = PolynomialExpansion::new(2, 3).unwrap();
        assert_eq!(
            e.names(&names).unwrap(),
            vec!["x", "y", "x^2", "x*y", "y^2", "x^3", "x^2*y", "x*y^2", "y^3"]
        );
    }

    #[test]
    fn counts_match_binomial() {
        // monomials of degree 1..=k over d inputs: C(d + k, k) - 1
        assert_eq!(PolynomialExpansion::new(34, 2).unwrap().n_outputs(), 629);
        for d in 1..8 {
            for k in 1..4 {
                let e = PolynomialExpansion::new(d, k).unwrap();
                assert_eq!(e.n_outputs(), binom(d + k, k) - 1, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn rejects_degree_zero() {
        assert!(PolynomialExpansion::new(3, 0).is_err());
    }
}
