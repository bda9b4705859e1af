//! Starshaped domains about the origin of `R^k`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{GeomError, Result};
use crate::scalar::Real;

type Predicate<T> = Arc<dyn Fn(&DVector<T>) -> bool + Send + Sync>;

#[derive(Clone)]
enum Kind<T: Real> {
    Ball {
        radius: T,
    },
    /// `bound` is a half-width of a box containing the domain.
    Predicate {
        bound: T,
        pred: Predicate<T>,
    },
}

/// Open starshaped domain with a boundary margin: a point belongs to the
/// domain when it lies at least `margin` inside the underlying set.
#[derive(Clone)]
pub struct DomainSpec<T: Real> {
    kind: Kind<T>,
    margin: T,
}

impl<T: Real> fmt::Debug for DomainSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Ball { radius } => write!(f, "Ball(radius={radius}, margin={})", self.margin),
            Kind::Predicate { bound, .. } => {
                write!(f, "Predicate(bound={bound}, margin={})", self.margin)
            }
        }
    }
}

impl<T: Real> DomainSpec<T> {
    pub fn ball(radius: T) -> Self {
        Self {
            kind: Kind::Ball { radius },
            margin: T::zero(),
        }
    }

    /// Domain given by a membership test. The caller vouches that the set is
    /// starshaped about 0 and contained in the box `[-bound, bound]^k`.
    pub fn predicate<F>(bound: T, pred: F) -> Result<Self>
    where
        F: Fn(&DVector<T>) -> bool + Send + Sync + 'static,
    {
        Ok(Self {
            kind: Kind::Predicate {
                bound,
                pred: Arc::new(pred),
            },
            margin: T::zero(),
        })
    }

    pub fn with_margin(mut self, margin: T) -> Self {
        self.margin = margin;
        self
    }

    pub fn margin(&self) -> T {
        self.margin
    }

    /// Radius of the ball, or `None` for predicate domains.
    pub fn radius(&self) -> Option<T> {
        match &self.kind {
            Kind::Ball { radius } => Some(*radius),
            Kind::Predicate { .. } => None,
        }
    }

    /// Half-width of a box containing the usable part of the domain.
    pub fn bound(&self) -> T {
        match &self.kind {
            Kind::Ball { radius } => *radius - self.margin,
            Kind::Predicate { bound, .. } => *bound,
        }
    }

    pub fn contains(&self, w: &DVector<T>) -> bool {
        match &self.kind {
            Kind::Ball { radius } => w.norm() < *radius - self.margin,
            Kind::Predicate { pred, bound } => {
                if w.amax() > *bound {
                    return false;
                }
                if self.margin > T::zero() {
                    // Require the margin-ball's axis points to stay inside as well.
                    let k = w.len();
                    (0..k).all(|i| {
                        let mut e = DVector::zeros(k);
                        e[i] = self.margin;
                        pred(&(w + &e)) && pred(&(w - &e))
                    }) && pred(w)
                } else {
                    pred(w)
                }
            }
        }
    }

    pub fn require(&self, w: &DVector<T>) -> Result<()> {
        if self.contains(w) {
            Ok(())
        } else {
            Err(GeomError::DomainViolation {
                at: crate::linalg::coords_f64(w),
            })
        }
    }

    /// Checks `0 ∈ domain` for dimension `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        if !self.contains(&DVector::zeros(k)) {
            return Err(GeomError::InvalidArgument(
                "domain must contain the origin".into(),
            ));
        }
        Ok(())
    }
}
