use num_complex::Complex64;

use crate::smallalg::Spectrum;

/// Follows eigenvalue branches through a sequence of spectra by
/// nearest-neighbour matching and returns branch `branch` together with the
/// number of ambiguous steps.
///
/// Branches start in sorted order. A step is ambiguous when, for some branch,
/// the runner-up candidate is within twice the distance of the best one while
/// the two candidates are distinguishable; such steps fall back to sorted
/// order, so collisions (e.g. a real pair merging into a complex pair) are
/// resolved by rank rather than by guesswork.
pub fn track_branch(spectra: &[Spectrum], branch: usize) -> (Vec<Complex64>, usize) {
    let mut out = Vec::with_capacity(spectra.len());
    let Some(first) = spectra.first() else {
        return (out, 0);
    };
    let mut current = first.values.clone();
    out.push(current[branch]);
    let mut ambiguous = 0;
    for spec in &spectra[1..] {
        let candidates = spec.values.clone();
        match match_step(&current, &candidates) {
            Some(next) => current = next,
            None => {
                ambiguous += 1;
                current = candidates;
            }
        }
        out.push(current[branch]);
    }
    (out, ambiguous)
}

fn match_step(prev: &[Complex64], cand: &[Complex64]) -> Option<Vec<Complex64>> {
    let scale = 1e-12 * (1.0 + prev.iter().chain(cand).fold(0.0f64, |m, v| m.max(v.norm())));
    let mut used = vec![false; cand.len()];
    let mut next = Vec::with_capacity(prev.len());
    for p in prev {
        let mut best: Option<(f64, usize)> = None;
        let mut second: Option<(f64, usize)> = None;
        for (k, c) in cand.iter().enumerate().filter(|(k, _)| !used[*k]) {
            let d = (c - p).norm();
            if best.map_or(true, |b| d < b.0) {
                second = best;
                best = Some((d, k));
            } else if second.map_or(true, |s| d < s.0) {
                second = Some((d, k));
            }
        }
        let (d1, k1) = best?;
        if let Some((d2, k2)) = second {
            if d2 <= 2.0 * d1 && (cand[k2] - cand[k1]).norm() > scale {
                return None;
            }
        }
        used[k1] = true;
        next.push(cand[k1]);
    }
    Some(next)
}
