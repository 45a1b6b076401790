//! Small summation helpers shared by the estimators.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and standard error of the mean from running sums of `x` and `x²`.
pub(crate) fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - sum * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Pairwise (binary-counter) reduction over an ordered stream of partial sums.
///
/// The merge tree depends only on the number of items pushed, so the result
/// is bit-identical however the partial sums were produced.
#[derive(Debug)]
pub struct PairwiseReducer<T> {
    stack: Vec<(u32, T)>,
}

impl<T> Default for PairwiseReducer<T> {
    fn default() -> Self {
        PairwiseReducer { stack: Vec::new() }
    }
}

impl<T> PairwiseReducer<T> {
    pub fn push(&mut self, item: T, merge: impl Fn(&mut T, T)) {
        let mut level = 0u32;
        let mut item = item;
        while let Some((top_level, _)) = self.stack.last() {
            if *top_level != level {
                break;
            }
            let (_, mut left) = self.stack.pop().unwrap();
            merge(&mut left, item);
            item = left;
            level += 1;
        }
        self.stack.push((level, item));
    }

    pub fn finish(mut self, merge: impl Fn(&mut T, T)) -> Option<T> {
        let mut acc = self.stack.pop().map(|(_, t)| t)?;
        while let Some((_, mut left)) = self.stack.pop() {
            merge(&mut left, acc);
            acc = left;
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = NeumaierSum::default();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, e) = mean_and_stderr(6.0, 12.0, 3);
        assert_eq!(m, 2.0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn pairwise_reducer_matches_plain_sum_for_integers() {
        for n in 1..40u64 {
            let mut r = PairwiseReducer::default();
            for k in 0..n {
                r.push(k, |a, b| *a += b);
            }
            assert_eq!(r.finish(|a, b| *a += b), Some(n * (n - 1) / 2));
        }
        let r: PairwiseReducer<u64> = PairwiseReducer::default();
        assert_eq!(r.finish(|a, b| *a += b), None);
    }
}
