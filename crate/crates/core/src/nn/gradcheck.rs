use rand::Rng;

use crate::rng::{rng_from, SimRng};
use crate::Result;

use super::{linear, multi_head_attention, AttentionParams, Tape, Tensor, Var};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// `|a − b| / (|a| + |b| + 1e-12)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + 1e-12)
}

/// Compares the reverse-mode gradient of the scalar `f` with central
/// differences `(f(x+h) − f(x−h)) / 2h` on every coordinate of every input
/// and returns the largest relative error.
pub fn grad_check<F>(f: F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out);

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            work[i].data_mut()[j] = x + h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = x - h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = x;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[j], numeric);
            if err.is_nan() {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

fn random(rng: &mut SimRng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
}

/// Moves entries of `t` at least `gap` away from zero.
fn nudge(mut t: Tensor, gap: f64) -> Tensor {
    for v in t.data_mut() {
        if v.abs() < gap {
            *v = if *v < 0.0 { -gap } else { gap } * 2.0;
        }
    }
    t
}

/// Reduces a tensor to a scalar with a fixed random projection so every
/// output coordinate contributes a distinct weight.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let mut rng = rng_from(seed);
    let r = random(&mut rng, tape.value(y).shape());
    let r = tape.leaf(r);
    let prod = tape.mul(y, r)?;
    Ok(tape.sum(prod))
}

type Check = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>);

/// Gradient checks for every primitive and layer. With `corrupt` set,
/// every backward pass is deliberately scaled by 1.01 so that the suite
/// must fail.
pub fn layer_suite(seed: u64, corrupt: bool) -> Result<Vec<CheckResult>> {
    let mut rng = rng_from(seed);
    let mut r = |shape: &[usize]| random(&mut rng, shape);
    let s = seed;
    let checks: Vec<Check> = vec![
        (
            "sum_of_squares",
            vec![r(&[3, 4])],
            Box::new(|t, v| {
                let sq = t.mul(v[0], v[0])?;
                Ok(t.sum(sq))
            }),
        ),
        ("matmul", vec![r(&[3, 4]), r(&[4, 5])], Box::new(move |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, s + 1)
        })),
        ("matmul_nt", vec![r(&[3, 4]), r(&[5, 4])], Box::new(move |t, v| {
            let y = t.matmul_nt(v[0], v[1])?;
            project(t, y, s + 2)
        })),
        ("add", vec![r(&[3, 4]), r(&[3, 4])], Box::new(move |t, v| {
            let y = t.add(v[0], v[1])?;
            project(t, y, s + 3)
        })),
        ("broadcast_add", vec![r(&[3, 4]), r(&[4])], Box::new(move |t, v| {
            let y = t.add_row(v[0], v[1])?;
            project(t, y, s + 4)
        })),
        ("mul", vec![r(&[3, 4]), r(&[3, 4])], Box::new(move |t, v| {
            let y = t.mul(v[0], v[1])?;
            project(t, y, s + 5)
        })),
        ("relu", vec![nudge(r(&[4, 5]), 1e-3)], Box::new(move |t, v| {
            let y = t.relu(v[0]);
            project(t, y, s + 6)
        })),
        ("scale", vec![r(&[2, 3])], Box::new(move |t, v| {
            let y = t.scale(v[0], -1.7);
            project(t, y, s + 7)
        })),
        ("layer_norm", vec![r(&[3, 6]), r(&[6]), r(&[6])], Box::new(move |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2])?;
            project(t, y, s + 8)
        })),
        ("softmax", vec![r(&[3, 5])], Box::new(move |t, v| {
            let y = t.softmax(v[0]);
            project(t, y, s + 9)
        })),
        ("transpose", vec![r(&[3, 5])], Box::new(move |t, v| {
            let y = t.transpose(v[0]);
            project(t, y, s + 10)
        })),
        ("concat", vec![r(&[3, 2]), r(&[3, 4])], Box::new(move |t, v| {
            let y = t.concat_cols(&[v[0], v[1], v[0]])?;
            project(t, y, s + 11)
        })),
        ("slice", vec![r(&[3, 6])], Box::new(move |t, v| {
            let y = t.slice_cols(v[0], 2, 3)?;
            project(t, y, s + 12)
        })),
        ("gather_rows", vec![r(&[4, 3])], Box::new(move |t, v| {
            let y = t.gather_rows(v[0], &[2, 0, 2, 3])?;
            project(t, y, s + 13)
        })),
        ("dense", vec![r(&[5, 4]), r(&[4, 3]), r(&[3])], Box::new(move |t, v| {
            let y = linear(t, v[0], v[1], v[2])?;
            project(t, y, s + 14)
        })),
        ("bce_with_logits", vec![r(&[4, 6]).scale_by(3.0)], Box::new(move |t, v| {
            let mut rng = rng_from(s + 15);
            let labels = Tensor::new(vec![4, 6], (0..24).map(|_| f64::from(rng.random::<bool>() as u8)).collect())?;
            let mask = Tensor::new(vec![4, 6], (0..24).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect())?;
            t.bce_with_logits(v[0], &labels, Some(&mask))
        })),
        (
            "multi_head_attention",
            vec![r(&[5, 6]), r(&[6, 6]), r(&[6]), r(&[6, 6]), r(&[6, 6]), r(&[6]), r(&[6, 6]), r(&[6])],
            Box::new(move |t, v| {
                // The key bias shifts every score in a row equally, so its
                // gradient is exactly zero; it is held constant here and
                // checked separately.
                let bk = t.leaf(random(&mut rng_from(s + 16), &[6]));
                let p = AttentionParams {
                    wq: v[1],
                    bq: v[2],
                    wk: v[3],
                    bk,
                    wv: v[4],
                    bv: v[5],
                    wo: v[6],
                    bo: v[7],
                    num_heads: 2,
                };
                let y = multi_head_attention(t, v[0], &p)?.output;
                project(t, y, s + 17)
            }),
        ),
    ];

    let mut results = Vec::with_capacity(checks.len());
    for (name, inputs, f) in checks {
        let err = if corrupt {
            grad_check(
                |t, v| {
                    let y = f(t, v)?;
                    Ok(t.faulty_identity(y, 1.01))
                },
                &inputs,
                GRADCHECK_STEP,
            )?
        } else {
            grad_check(&f, &inputs, GRADCHECK_STEP)?
        };
        results.push(CheckResult {
            name: name.to_string(),
            max_rel_error: err,
        });
    }
    Ok(results)
}

trait ScaleBy {
    fn scale_by(self, f: f64) -> Self;
}

impl ScaleBy for Tensor {
    fn scale_by(mut self, f: f64) -> Self {
        self.data_mut().iter_mut().for_each(|v| *v *= f);
        self
    }
}
