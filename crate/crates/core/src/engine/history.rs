/// Ring buffer holding the last `delay_steps + 1` states of a path.
///
/// Starts filled with the initial datum, which realizes a constant
/// pre-history on `(−τ, 0]`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    width: usize,
    depth: usize,
    data: Vec<f64>,
    /// Slot of the most recent state.
    head: usize,
}

impl HistoryBuffer {
    pub fn new(width: usize, delay_steps: usize, initial: &[f64]) -> Self {
        assert_eq!(initial.len(), width);
        let depth = delay_steps + 1;
        let mut data = Vec::with_capacity(depth * width);
        for _ in 0..depth {
            data.extend_from_slice(initial);
        }
        Self {
            width,
            depth,
            data,
            head: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn push(&mut self, state: &[f64]) {
        self.head = (self.head + 1) % self.depth;
        let w = self.width;
        self.data[self.head * w..(self.head + 1) * w].copy_from_slice(state);
    }

    /// State `lag` steps back (`lag ≤ delay_steps`).
    pub fn lagged(&self, lag: usize) -> &[f64] {
        assert!(lag < self.depth);
        let slot = (self.head + self.depth - lag) % self.depth;
        &self.data[slot * self.width..(slot + 1) * self.width]
    }

    /// The newest state and the state exactly one delay earlier.
    pub fn current_and_delayed(&self) -> (&[f64], &[f64]) {
        (self.lagged(0), self.lagged(self.depth - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_lookup() {
        let mut h = HistoryBuffer::new(1, 3, &[9.0]);
        assert_eq!(h.current_and_delayed(), (&[9.0][..], &[9.0][..]));
        for k in 1..=10 {
            h.push(&[k as f64]);
            let expected = if k > 3 { (k - 3) as f64 } else { 9.0 };
            assert_eq!(h.current_and_delayed().1[0], expected);
            assert_eq!(h.current_and_delayed().0[0], k as f64);
            let prev = if k > 1 { (k - 1) as f64 } else { 9.0 };
            assert_eq!(h.lagged(1)[0], prev);
        }
    }

    #[test]
    fn zero_delay_reads_current() {
        let mut h = HistoryBuffer::new(2, 0, &[1.0, 2.0]);
        h.push(&[3.0, 4.0]);
        let (c, d) = h.current_and_delayed();
        assert_eq!(c, d);
        assert_eq!(c, &[3.0, 4.0]);
    }
}
