//! Synthetic addition tasks, image tasks and their encodings.

mod mnist;

pub use mnist::{
    build_image_tasks, intrinsic_dimension, load_mnist_idx, parse_idx_images, parse_idx_labels,
    preprocess_images, ImagePreprocessSpec, RawImages, MNIST_CLASS_PLAN,
};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: bad {field}: {message}")]
    Format {
        file: String,
        field: &'static str,
        message: String,
    },
    #[error("class {class} has {available} samples, {needed} requested")]
    Insufficient {
        class: u8,
        needed: usize,
        available: usize,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    BinaryAdd,
    DecimalAdd,
    Image,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Values(Matrix),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.rows(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Values(m) => Targets::Values(m.select_rows(rows)),
            Targets::Labels(l) => Targets::Labels(rows.iter().map(|&r| l[r]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub kind: TaskKind,
    pub intrinsic_dim: Option<f64>,
    /// Operand pairs for the addition tasks, in generation order.
    pub operands: Vec<(u8, u8)>,
    /// Consecutive rows forming one sample (4 for unrolled binary addition).
    pub rows_per_sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    /// 1-based.
    pub task_index: usize,
    pub inputs: Matrix,
    pub targets: Targets,
    pub meta: TaskMeta,
}

impl TaskDataset {
    pub fn new(task_index: usize, inputs: Matrix, targets: Targets, kind: TaskKind) -> Result<Self, DataError> {
        if task_index == 0 {
            return Err(DataError::Usage("task indices start at 1".into()));
        }
        if inputs.rows() != targets.len() {
            return Err(DataError::Usage(format!(
                "{} input rows vs {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        Ok(Self {
            task_index,
            inputs,
            targets,
            meta: TaskMeta {
                kind,
                intrinsic_dim: None,
                operands: Vec::new(),
                rows_per_sample: 1,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_samples(&self) -> usize {
        self.len() / self.meta.rows_per_sample.max(1)
    }

    /// Task-appropriate accuracy in [0, 1].
    ///
    /// * binary: fraction of output bits on the right side of 0.5
    /// * decimal: fraction of rows whose decoded digit and carry are both right
    /// * image: argmax accuracy
    /// * regression: fraction of entries within 0.1 of the target
    pub fn accuracy(&self, pred: &Matrix) -> f64 {
        let n = pred.rows();
        if n == 0 {
            return 0.0;
        }
        match (&self.targets, self.meta.kind) {
            (Targets::Labels(labels), _) => {
                let hits = (0..n)
                    .filter(|&r| {
                        let row = pred.row(r);
                        let arg = (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
                        arg == labels[r]
                    })
                    .count();
                hits as f64 / n as f64
            }
            (Targets::Values(t), TaskKind::BinaryAdd) => {
                let hits = pred
                    .as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .filter(|(p, t)| (**p > BIT_THRESHOLD) == (**t > BIT_THRESHOLD))
                    .count();
                hits as f64 / t.as_slice().len() as f64
            }
            (Targets::Values(t), TaskKind::DecimalAdd) => {
                let hits = (0..n)
                    .filter(|&r| {
                        decode_digit(pred.get(r, 0)) == decode_digit(t.get(r, 0))
                            && decode_carry(pred.get(r, 1)) == decode_carry(t.get(r, 1))
                    })
                    .count();
                hits as f64 / n as f64
            }
            (Targets::Values(t), _) => {
                let hits = pred
                    .as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .filter(|(p, t)| (**p - **t).abs() < 0.1)
                    .count();
                hits as f64 / t.as_slice().len() as f64
            }
        }
    }

    /// One CSV row per sample: `task,row,x0..,y0..` (or `label`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["task".to_string(), "row".to_string()];
        header.extend((0..self.inputs.cols()).map(|c| format!("x{c}")));
        match &self.targets {
            Targets::Values(t) => header.extend((0..t.cols()).map(|c| format!("y{c}"))),
            Targets::Labels(_) => header.push("label".into()),
        }
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec = vec![self.task_index.to_string(), r.to_string()];
            rec.extend(self.inputs.row(r).iter().map(|v| v.to_string()));
            match &self.targets {
                Targets::Values(t) => rec.extend(t.row(r).iter().map(|v| v.to_string())),
                Targets::Labels(l) => rec.push(l[r].to_string()),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

pub const BIT_THRESHOLD: f64 = 0.5;
pub const NUM_ADDITION_TASKS: usize = 5;
pub const BINARY_BITS: usize = 4;

/// Operand pairs of task `n`: `(n, d)` then `(d, n)` for `d = 1..=9`.
/// `n + n` appears twice, as in the published task tables.
pub fn addition_pairs(n: u8) -> Vec<(u8, u8)> {
    (1..=9).map(|d| (n, d)).chain((1..=9).map(|d| (d, n))).collect()
}

/// Unrolls `a + b` into `BINARY_BITS` ripple-carry steps, least significant
/// bit first: `(a_k, b_k, carry_in) -> (sum_k, carry_out)`.
pub fn unroll_binary(a: u8, b: u8) -> Vec<([f64; 3], [f64; 2])> {
    let mut carry = 0u8;
    (0..BINARY_BITS)
        .map(|k| {
            let x = (a >> k) & 1;
            let y = (b >> k) & 1;
            let s = x + y + carry;
            let row = ([x as f64, y as f64, carry as f64], [(s & 1) as f64, (s >> 1) as f64]);
            carry = s >> 1;
            row
        })
        .collect()
}

/// Reassembles an integer from per-step sum bits and the last carry-out.
pub fn reassemble_binary(sum_bits: &[f64], final_carry: f64) -> u32 {
    let mut v = 0u32;
    for (k, b) in sum_bits.iter().enumerate() {
        if *b > BIT_THRESHOLD {
            v |= 1 << k;
        }
    }
    if final_carry > BIT_THRESHOLD {
        v |= 1 << sum_bits.len();
    }
    v
}

/// Five binary-addition tasks, 18 operand pairs each, 4 rows per pair.
pub fn gen_binary_tasks() -> Vec<TaskDataset> {
    (1..=NUM_ADDITION_TASKS as u8)
        .map(|n| {
            let pairs = addition_pairs(n);
            let mut xs = Vec::with_capacity(pairs.len() * BINARY_BITS * 3);
            let mut ys = Vec::with_capacity(pairs.len() * BINARY_BITS * 2);
            for &(a, b) in &pairs {
                for (x, y) in unroll_binary(a, b) {
                    xs.extend(x);
                    ys.extend(y);
                }
            }
            let rows = pairs.len() * BINARY_BITS;
            let mut task = TaskDataset::new(
                n as usize,
                Matrix::from_vec(rows, 3, xs),
                Targets::Values(Matrix::from_vec(rows, 2, ys)),
                TaskKind::BinaryAdd,
            )
            .expect("consistent shapes");
            task.meta.operands = pairs;
            task.meta.rows_per_sample = BINARY_BITS;
            task
        })
        .collect()
}

/// Digit `d` ↦ `d / 4.5 - 1`, spreading 0..=9 over [-1, 1].
pub fn encode_digit(d: u8) -> f64 {
    d as f64 / 4.5 - 1.0
}

pub fn decode_digit(v: f64) -> u8 {
    ((v + 1.0) * 4.5).round().clamp(0.0, 9.0) as u8
}

pub fn encode_carry(c: bool) -> f64 {
    if c {
        1.0
    } else {
        -1.0
    }
}

pub fn decode_carry(v: f64) -> bool {
    v > 0.0
}

/// `(a + b) mod 10` and the carry.
pub fn decimal_target(a: u8, b: u8) -> (u8, bool) {
    let s = a + b;
    (s % 10, s >= 10)
}

/// Five decimal-addition tasks with inputs `(enc a, enc b)` and targets
/// `(enc (a+b) mod 10, enc carry)`.
pub fn gen_decimal_tasks() -> Vec<TaskDataset> {
    (1..=NUM_ADDITION_TASKS as u8)
        .map(|n| {
            let pairs = addition_pairs(n);
            let mut xs = Vec::with_capacity(pairs.len() * 2);
            let mut ys = Vec::with_capacity(pairs.len() * 2);
            for &(a, b) in &pairs {
                let (s, c) = decimal_target(a, b);
                xs.extend([encode_digit(a), encode_digit(b)]);
                ys.extend([encode_digit(s), encode_carry(c)]);
            }
            let rows = pairs.len();
            let mut task = TaskDataset::new(
                n as usize,
                Matrix::from_vec(rows, 2, xs),
                Targets::Values(Matrix::from_vec(rows, 2, ys)),
                TaskKind::DecimalAdd,
            )
            .expect("consistent shapes");
            task.meta.operands = pairs;
            task
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn binary_task_one_has_published_pairs() {
        let tasks = gen_binary_tasks();
        assert_eq!(tasks.len(), 5);
        let t1 = &tasks[0].meta.operands;
        assert!(t1.contains(&(0b0001, 0b0001)));
        assert!(t1.contains(&(0b0001, 0b1001)));
        for t in &tasks {
            assert_eq!(t.meta.operands.len(), 18);
            assert_eq!(t.len(), 18 * BINARY_BITS);
        }
    }

    #[test]
    fn binary_rows_follow_ripple_carry() {
        for t in gen_binary_tasks() {
            let Targets::Values(y) = &t.targets else { panic!() };
            for (p, &(a, b)) in t.meta.operands.iter().enumerate() {
                let mut carry = 0u32;
                let mut sum_bits = Vec::new();
                for k in 0..BINARY_BITS {
                    let r = p * BINARY_BITS + k;
                    let x = t.inputs.row(r);
                    let (ak, bk) = ((a as u32 >> k) & 1, (b as u32 >> k) & 1);
                    assert_eq!(x, &[ak as f64, bk as f64, carry as f64]);
                    let total = ak + bk + carry;
                    assert_eq!(y.row(r), &[(total % 2) as f64, (total / 2) as f64]);
                    carry = total / 2;
                    sum_bits.push(y.get(r, 0));
                }
                let last = p * BINARY_BITS + BINARY_BITS - 1;
                assert_eq!(reassemble_binary(&sum_bits, y.get(last, 1)), a as u32 + b as u32);
            }
        }
    }

    #[test]
    fn decimal_examples() {
        assert_eq!(decimal_target(7, 5), (2, true));
        assert_eq!(decimal_target(1, 1), (2, false));
        let t = &gen_decimal_tasks()[0];
        let Targets::Values(y) = &t.targets else { panic!() };
        // (1, 1) is the first row of task 1.
        assert_eq!(y.row(0), &[encode_digit(2), -1.0]);
    }

    #[test]
    fn decimal_targets_match_integer_oracle_for_all_digit_pairs() {
        for a in 0..10u8 {
            for b in 0..10u8 {
                let (s, c) = decimal_target(a, b);
                assert_eq!(s as u32 + 10 * c as u32, a as u32 + b as u32);
            }
        }
        let mut union = BTreeSet::new();
        for t in gen_decimal_tasks() {
            let Targets::Values(y) = &t.targets else { panic!() };
            for (r, &(a, b)) in t.meta.operands.iter().enumerate() {
                assert_eq!(decode_digit(t.inputs.get(r, 0)), a);
                assert_eq!(decode_digit(t.inputs.get(r, 1)), b);
                let sum = decode_digit(y.get(r, 0)) as u32 + 10 * decode_carry(y.get(r, 1)) as u32;
                assert_eq!(sum, a as u32 + b as u32);
                union.insert((a, b));
            }
            let distinct: BTreeSet<_> = t.meta.operands.iter().collect();
            // n + n is listed under both orderings.
            assert_eq!(distinct.len(), 17);
        }
        // 5 tasks × 17 distinct pairs minus the 20 ordered pairs shared by two tasks.
        assert_eq!(union.len(), 65);
    }

    #[test]
    fn encodings_round_trip() {
        for d in 0..10u8 {
            assert_eq!(decode_digit(encode_digit(d)), d);
            assert!((-1.0..=1.0).contains(&encode_digit(d)));
        }
        for c in [false, true] {
            assert_eq!(decode_carry(encode_carry(c)), c);
        }
    }

    #[test]
    fn accuracy_of_exact_predictions_is_one() {
        for t in gen_binary_tasks().into_iter().chain(gen_decimal_tasks()) {
            let Targets::Values(y) = &t.targets else { panic!() };
            assert_eq!(t.accuracy(y), 1.0);
        }
    }

    #[test]
    fn csv_export_has_one_row_per_sample() {
        let t = &gen_decimal_tasks()[2];
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "task,row,x0,x1,y0,y1");
        assert_eq!(lines.len(), 19);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let r = TaskDataset::new(1, Matrix::zeros(3, 1), Targets::Labels(vec![0; 2]), TaskKind::Image);
        assert!(r.is_err());
        assert!(TaskDataset::new(0, Matrix::zeros(0, 1), Targets::Labels(vec![]), TaskKind::Image).is_err());
    }
}
