use super::search::{ControlSpace, SearchError};
use crate::dataflow::{InputRange, TestCase};
use crate::util::keyed_rng;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fixed-size-candidate-set adaptive random testing. The first test is
/// uniform; each later one is the best of `candidates` uniform draws by
/// minimum distance to the tests already chosen, measured in control-point
/// space normalized per input to `[0, 1]`.
pub fn art_generate(
    inputs: &[(String, InputRange)],
    q_t: usize,
    n: usize,
    candidates: usize,
    seed: u64,
) -> Result<Vec<TestCase>, SearchError> {
    let space = ControlSpace::new(inputs.to_vec(), q_t)?;
    let mut rng = keyed_rng(seed, 0);
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(n);
    while chosen.len() < n {
        let pick = if chosen.is_empty() {
            space.random_point(&mut rng)
        } else {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..candidates.max(1) {
                let c = space.random_point(&mut rng);
                let d = chosen.iter().map(|s| distance(s, &c)).fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|(bd, _)| d > *bd) {
                    best = Some((d, c));
                }
            }
            best.expect("at least one candidate").1
        };
        chosen.push(pick);
    }
    Ok(chosen.iter().map(|x| space.decode(x)).collect())
}

/// Plain uniform random tests, the baseline ART is compared against.
pub fn random_tests(inputs: &[(String, InputRange)], q_t: usize, n: usize, seed: u64) -> Result<Vec<TestCase>, SearchError> {
    art_generate(inputs, q_t, n, 1, seed)
}

/// Smallest pairwise distance between tests in normalized control space.
pub fn min_pairwise_distance(inputs: &[(String, InputRange)], q_t: usize, tests: &[TestCase]) -> f64 {
    let Ok(space) = ControlSpace::new(inputs.to_vec(), q_t) else { return f64::NAN };
    let pts: Vec<Vec<f64>> = tests.iter().map(|t| space.encode(t)).collect();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(distance(&pts[i], &pts[j]));
        }
    }
    best
}
