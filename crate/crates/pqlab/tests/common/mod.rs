//! Shared fixtures for the integration suites.

use std::sync::Arc;

use pqlab::{build_domain, gradients, Domain, Point, ScalarField, Shape};

pub fn disk(h: f64) -> Arc<Domain> {
    build_domain(Shape::Disk { center: Point::new(0.0, 0.0), radius: 1.0 }, h).unwrap()
}

#[derive(Debug, Clone)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub amp: f64,
}

/// Sum of Gaussian bumps, zero on the Dirichlet ring, rescaled so the
/// gradient sup is 1 (returns `None` for degenerate cancellation).
pub fn bump_field(d: &Arc<Domain>, bumps: &[Bump]) -> Option<ScalarField> {
    let f = ScalarField::from_fn(d, true, |pt: Point| {
        bumps
            .iter()
            .map(|b| {
                let dx = pt.x - b.cx;
                let dy = pt.y - b.cy;
                b.amp * (-(dx * dx + dy * dy) / (2.0 * b.width * b.width)).exp()
            })
            .sum()
    });
    let m = gradients(&f).max_magnitude();
    if m < 1e-9 {
        return None;
    }
    Some(f.scaled(1.0 / m))
}
