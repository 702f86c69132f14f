//! Small dense vector helpers on slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest point of the closed ball `B[center, radius]`.
pub fn project_ball(center: &[f64], radius: f64, q: &[f64]) -> Vec<f64> {
    let d = dist(q, center);
    if d <= radius {
        return q.to_vec();
    }
    let s = radius / d;
    center.iter().zip(q).map(|(c, x)| c + s * (x - c)).collect()
}

/// `(t, x)` packed as one point of the space-time.
pub fn join(t: f64, x: &[f64]) -> Vec<f64> {
    let mut q = Vec::with_capacity(x.len() + 1);
    q.push(t);
    q.extend_from_slice(x);
    q
}
