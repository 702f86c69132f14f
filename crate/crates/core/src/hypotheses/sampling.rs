//! Deterministic low-discrepancy points in the unit cube.

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Halton sequence; the seed shifts the starting index.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sequence supports up to {} dimensions",
            PRIMES.len()
        );
        Halton {
            dim,
            index: seed.wrapping_mul(7919).wrapping_add(1),
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        PRIMES[..self.dim]
            .iter()
            .map(|&p| radical_inverse(i, p))
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_in_base_two_and_three() {
        let mut h = Halton::new(2, 0);
        assert_eq!(h.next_point(), vec![0.5, 1.0 / 3.0]);
        assert_eq!(h.next_point(), vec![0.25, 2.0 / 3.0]);
    }

    #[test]
    fn points_stay_in_unit_cube() {
        let mut h = Halton::new(5, 3);
        for _ in 0..1000 {
            assert!(h.next_point().iter().all(|v| (0.0..1.0).contains(v)));
        }
    }
}
