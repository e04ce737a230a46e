//! Samples, the positive/negative label split, and the exact One-Node-ReLU
//! objective.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, relu, sum_terms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Sample { x, y }
    }
}

/// An immutable training set.
///
/// Samples keep their input order; the label split is carried as index
/// lists. `pos_idx` holds the samples with `y > 0` ordered by nondecreasing
/// `y` (stable, so ties keep input order). `neg_idx` holds the samples with
/// `y <= 0` in input order. Indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    pos_idx: Vec<usize>,
    neg_idx: Vec<usize>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        build_dataset(samples)
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of positive-label samples.
    pub fn m(&self) -> usize {
        self.pos_idx.len()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Row-major design matrix, `n * p` entries.
    pub fn design(&self) -> &[f64] {
        &self.xs
    }

    pub fn pos_idx(&self) -> &[usize] {
        &self.pos_idx
    }

    pub fn neg_idx(&self) -> &[usize] {
        &self.neg_idx
    }

    pub fn samples(&self) -> Vec<Sample> {
        (0..self.n())
            .map(|i| Sample::new(self.x(i).to_vec(), self.y(i)))
            .collect()
    }

    /// Pre-activation `x_iᵀβ + β₀`.
    pub fn linear(&self, i: usize, theta: &Params) -> f64 {
        dot(self.x(i), &theta.beta) + theta.beta0
    }

    pub fn check_params(&self, theta: &Params) -> Result<()> {
        if theta.beta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: theta.beta.len(),
            });
        }
        Ok(())
    }

    /// Restricts the dataset to the given sample ids, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        build_dataset(
            ids.iter()
                .map(|&i| Sample::new(self.x(i).to_vec(), self.y(i)))
                .collect(),
        )
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 2 {
            return Err(Error::InvalidArgument(
                "csv needs at least one feature column and y".into(),
            ));
        }
        for (j, h) in headers.iter().enumerate() {
            let want = if j + 1 == cols {
                "y".to_string()
            } else {
                format!("x{j}")
            };
            if h.trim() != want {
                return Err(Error::InvalidArgument(format!(
                    "bad header column {j}: expected `{want}`, found `{h}`"
                )));
            }
        }
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut vals = Vec::with_capacity(cols);
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("row {row}: cannot parse `{field}`"))
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("csv row {row}")));
                }
                vals.push(v);
            }
            let y = vals.pop().expect("at least two columns");
            samples.push(Sample::new(vals, y));
        }
        build_dataset(samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header: Vec<String> = (0..self.p).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y(i).to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Candidate solution `(β, β₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub beta: Vec<f64>,
    pub beta0: f64,
}

impl Params {
    pub fn new(beta: Vec<f64>, beta0: f64) -> Self {
        Params { beta, beta0 }
    }

    pub fn zeros(p: usize) -> Self {
        Params::new(vec![0.0; p], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.beta0.is_finite() && self.beta.iter().all(|v| v.is_finite())
    }

    /// `[β, β₀]` as one vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.beta0);
        v
    }

    /// Inverse of [`Params::to_vec`].
    pub fn from_vec(v: &[f64]) -> Self {
        let (last, head) = v.split_last().expect("nonempty parameter vector");
        Params::new(head.to_vec(), *last)
    }

    /// Parameters of the intercept-augmented problem: `(β‖β₀, 0)`.
    pub fn fold_intercept(&self) -> Params {
        Params::new(self.to_vec(), 0.0)
    }
}

/// Builds a dataset, splitting labels into `I⁺` (`y > 0`, sorted by `y`) and
/// `I⁻` (`y <= 0`).
pub fn build_dataset(raw: Vec<Sample>) -> Result<Dataset> {
    let first = raw.first().ok_or(Error::Empty)?;
    let p = first.x.len();
    if p == 0 {
        return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
    }
    let n = raw.len();
    let mut xs = Vec::with_capacity(n * p);
    let mut ys = Vec::with_capacity(n);
    for (i, s) in raw.into_iter().enumerate() {
        if s.x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: s.x.len(),
            });
        }
        if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {i}")));
        }
        xs.extend_from_slice(&s.x);
        ys.push(s.y);
    }
    let (mut pos_idx, neg_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ys[i] > 0.0);
    // sort_by is stable
    pos_idx.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    Ok(Dataset {
        p,
        xs,
        ys,
        pos_idx,
        neg_idx,
    })
}

/// Appends a constant-1 feature to every sample.
pub fn augment_intercept(d: &Dataset) -> Dataset {
    let samples = (0..d.n())
        .map(|i| {
            let mut x = d.x(i).to_vec();
            x.push(1.0);
            Sample::new(x, d.y(i))
        })
        .collect();
    build_dataset(samples).expect("augmenting a valid dataset stays valid")
}

/// `Σ_i (max{0, x_iᵀβ + β₀} − y_i)²`, without the `1/n` factor.
pub fn relu_objective(d: &Dataset, theta: &Params) -> Result<f64> {
    d.check_params(theta)?;
    Ok(sum_terms(
        d.n(),
        (0..d.n()).map(|i| {
            let r = relu(d.linear(i, theta)) - d.y(i);
            r * r
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&[f64], f64)]) -> Dataset {
        build_dataset(rows.iter().map(|(x, y)| Sample::new(x.to_vec(), *y)).collect()).unwrap()
    }

    #[test]
    fn split_and_sort() {
        let d = ds(&[(&[1.0], 2.0), (&[2.0], -1.0), (&[0.0], 1.0)]);
        assert_eq!(d.pos_idx(), &[2, 0]);
        assert_eq!(d.neg_idx(), &[1]);
        assert_eq!(d.m(), 2);
    }

    #[test]
    fn all_nonpositive_labels() {
        let d = ds(&[(&[1.0], 0.0), (&[2.0], -1.0)]);
        assert!(d.pos_idx().is_empty());
        assert_eq!(d.neg_idx(), &[0, 1]);
    }

    #[test]
    fn ties_keep_input_order() {
        let d = ds(&[(&[5.0], 1.0), (&[6.0], 1.0), (&[7.0], 0.5)]);
        assert_eq!(d.pos_idx(), &[2, 0, 1]);
    }

    #[test]
    fn zero_label_is_negative() {
        let d = ds(&[(&[1.0], 0.0)]);
        assert_eq!(d.neg_idx(), &[0]);
    }

    #[test]
    fn rejects_bad_input() {
        let r = build_dataset(vec![Sample::new(vec![1.0], 1.0), Sample::new(vec![1.0, 2.0], 1.0)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let r = build_dataset(vec![Sample::new(vec![f64::NAN], 1.0)]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(matches!(build_dataset(vec![]), Err(Error::Empty)));
    }

    #[test]
    fn augmentation() {
        let d = ds(&[(&[2.0, 3.0], 1.0)]);
        let a = augment_intercept(&d);
        assert_eq!(a.x(0), &[2.0, 3.0, 1.0]);
        assert_eq!(a.p(), 3);
        let aa = augment_intercept(&a);
        assert_eq!(aa.x(0), &[2.0, 3.0, 1.0, 1.0]);

        let d = ds(&[(&[1.0], 1.0), (&[2.0], -3.0)]);
        let a = augment_intercept(&d);
        assert_eq!(a.p(), 2);
        assert_eq!(a.ys(), d.ys());
    }

    #[test]
    fn objective_examples() {
        let d = ds(&[(&[1.0], 1.0)]);
        assert_eq!(relu_objective(&d, &Params::new(vec![1.0], 0.0)).unwrap(), 0.0);
        let d = ds(&[(&[1.0], -1.0)]);
        assert_eq!(relu_objective(&d, &Params::new(vec![0.0], 0.0)).unwrap(), 1.0);
        let d = ds(&[(&[1.0], 2.0), (&[-1.0], 1.0)]);
        assert_eq!(relu_objective(&d, &Params::new(vec![0.0], 1.0)).unwrap(), 1.0);
        assert!(relu_objective(&d, &Params::new(vec![0.0, 1.0], 1.0)).is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let d = ds(&[(&[1.5, -2.0], 0.25), (&[0.0, 3.0], -1.0)]);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,y\n"));
        assert!(!text.contains('\r'));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);

        assert!(Dataset::read_csv("a,y\n1,2\n".as_bytes()).is_err());
        assert!(matches!(
            Dataset::read_csv("x0,y\nNaN,2\n".as_bytes()),
            Err(Error::NonFinite(_))
        ));
        assert!(Dataset::read_csv("x0,y\ninf,2\n".as_bytes()).is_err());
    }
}
