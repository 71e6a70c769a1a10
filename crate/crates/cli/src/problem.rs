//! Problem-file parsing: named operator families with complex entries as
//! `[re, im]` pairs, plus run options.

use serde::{Deserialize, Serialize};
use specsite::{C64, ComplexMatrix};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub dim: usize,
    pub operators: Vec<NamedOperator>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NamedOperator {
    pub name: String,
    /// Row-major entries, each as `[re, im]`.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Options {
    /// Relative tolerance for commutator and normality checks.
    pub tol: f64,
    /// Absolute tolerance for subspace comparisons in the site.
    pub site_tol: f64,
    pub seed: u64,
    pub full_subcontexts: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: specsite::matrix::DEFAULT_TOL,
            site_tol: 1e-8,
            seed: 0,
            full_subcontexts: false,
        }
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, String> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| format!("invalid problem file: {e}"))?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        if self.options.tol <= 0.0 || self.options.site_tol <= 0.0 {
            return Err("tolerances must be positive".into());
        }
        let mut names: Vec<&str> = self.operators.iter().map(|o| o.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.operators.len() {
            return Err("operator names must be unique".into());
        }
        for op in &self.operators {
            if op.matrix.len() != self.dim
                || op.matrix.iter().any(|row| row.len() != self.dim)
            {
                return Err(format!(
                    "operator '{}' is not {n}x{n}",
                    op.name,
                    n = self.dim
                ));
            }
        }
        Ok(())
    }

    pub fn matrices(&self) -> Result<Vec<ComplexMatrix>, String> {
        self.operators.iter().map(|o| o.to_matrix()).collect()
    }

    pub fn operator(&self, name: &str) -> Result<ComplexMatrix, String> {
        self.operators
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| format!("unknown operator '{name}'"))?
            .to_matrix()
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }
}

impl NamedOperator {
    pub fn to_matrix(&self) -> Result<ComplexMatrix, String> {
        let n = self.matrix.len();
        let mat = nalgebra_matrix(n, &self.matrix);
        ComplexMatrix::from_dmatrix(mat)
            .map_err(|e| format!("operator '{}': {e}", self.name))
    }
}

fn nalgebra_matrix(n: usize, rows: &[Vec<[f64; 2]>]) -> specsite::matrix::DMatrixC {
    specsite::matrix::DMatrixC::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAULI: &str = r#"{
        "dim": 2,
        "operators": [
            {"name": "Z", "matrix": [[[1,0],[0,0]],[[0,0],[-1,0]]]},
            {"name": "X", "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}
        ]
    }"#;

    #[test]
    fn parse_round_trip() {
        let file = ProblemFile::parse(PAULI).unwrap();
        let again = ProblemFile::parse(&file.to_json()).unwrap();
        assert_eq!(file, again);
    }

    #[test]
    fn rejects_bad_shape() {
        let bad = r#"{"dim": 2, "operators": [{"name": "A", "matrix": [[[1,0]]]}]}"#;
        assert!(ProblemFile::parse(bad).is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let bad = r#"{"dim": 1, "operators": [
            {"name": "A", "matrix": [[[1,0]]]},
            {"name": "A", "matrix": [[[2,0]]]}
        ]}"#;
        assert!(ProblemFile::parse(bad).is_err());
    }

    #[test]
    fn named_lookup() {
        let file = ProblemFile::parse(PAULI).unwrap();
        let z = file.operator("Z").unwrap();
        assert_eq!(z.get(1, 1), C64::new(-1.0, 0.0));
        assert!(file.operator("Y").is_err());
    }
}
