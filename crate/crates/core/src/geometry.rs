//! Rescaled domain families (ball and cylinder), boundary structure and
//! exact ray/boundary intersection along backwards characteristics.
//!
//! Conventions: the cylinder axis is the first coordinate `x¹`, the disk
//! coordinates are `x̂ = (x², x³)`. All dimensions are the base dimensions
//! divided by the rescaling parameter `ε`.

use crate::error::Error;
use crate::{Result, Vec3};
use serde::{Deserialize, Serialize};

/// Relative boundary tolerance, scaled by the domain diameter.
pub const BOUNDARY_TOL_REL: f64 = 1e-9;
/// Relative tolerance for classifying points as singular-edge hits,
/// scaled by the rescaled disk radius.
pub const EDGE_TOL_REL: f64 = 1e-7;

/// Accommodation coefficient profile on the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AccommodationProfile {
    /// `ι(x) = ι₀` everywhere, `ι₀ ∈ (0, 1]`.
    Constant(f64),
    /// Cylinder mixed condition: fully diffuse caps, fully specular
    /// lateral wall (`ι = 1` on Λ₁ ∪ Λ₂ and `ι = 0` on Λ₃).
    CapsDiffuseLateralSpecular,
}

/// Which piece of the boundary a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Cap at `x¹ = -L/ε` (outward normal `(-1, 0, 0)`).
    Cap1,
    /// Cap at `x¹ = +L/ε` (outward normal `(+1, 0, 0)`).
    Cap2,
    /// Lateral wall of the cylinder.
    Lateral,
    /// Boundary of a smooth (ball) domain.
    SmoothWall,
    /// Cylinder edge circle where caps meet the lateral wall.
    SingularEdge,
}

/// Boundary classification with the outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryClass {
    pub tag: BoundaryTag,
    pub normal: Vec3,
}

/// Domain shape, in base (pre-rescaling) dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Ball { radius_base: f64 },
    Cylinder { half_length_base: f64, disk_radius_base: f64 },
}

/// A rescaled domain: effective dimensions are the base dimensions
/// divided by `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
    pub epsilon: f64,
    pub accommodation: AccommodationProfile,
}

/// First boundary hit along the backwards ray `s ↦ x - s v`.
#[derive(Clone, Copy, Debug)]
pub struct Exit {
    /// Backwards flight time to the boundary.
    pub t_b: f64,
    /// Exit point on the boundary.
    pub x_exit: Vec3,
    pub class: BoundaryClass,
}

impl Domain {
    pub fn ball(radius_base: f64, epsilon: f64, iota: f64) -> Result<Self> {
        Self::new(DomainKind::Ball { radius_base }, epsilon, AccommodationProfile::Constant(iota))
    }

    pub fn cylinder(half_length_base: f64, disk_radius_base: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            DomainKind::Cylinder { half_length_base, disk_radius_base },
            epsilon,
            AccommodationProfile::CapsDiffuseLateralSpecular,
        )
    }

    pub fn new(kind: DomainKind, epsilon: f64, accommodation: AccommodationProfile) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        match kind {
            DomainKind::Ball { radius_base } if radius_base <= 0.0 => {
                return Err(Error::InvalidParameter("ball radius must be positive".into()));
            }
            DomainKind::Cylinder { half_length_base, disk_radius_base }
                if half_length_base <= 0.0 || disk_radius_base <= 0.0 =>
            {
                return Err(Error::InvalidParameter("cylinder dimensions must be positive".into()));
            }
            _ => {}
        }
        match accommodation {
            AccommodationProfile::Constant(i0) if !(i0 > 0.0 && i0 <= 1.0) => {
                return Err(Error::InvalidParameter(format!("iota_0 must lie in (0, 1], got {i0}")));
            }
            AccommodationProfile::CapsDiffuseLateralSpecular
                if matches!(kind, DomainKind::Ball { .. }) =>
            {
                return Err(Error::InvalidParameter(
                    "caps-diffuse/lateral-specular profile requires a cylinder".into(),
                ));
            }
            _ => {}
        }
        Ok(Domain { kind, epsilon, accommodation })
    }

    /// Rescaled ball radius `r/ε` (ball domains).
    pub fn ball_radius(&self) -> f64 {
        match self.kind {
            DomainKind::Ball { radius_base } => radius_base / self.epsilon,
            DomainKind::Cylinder { .. } => panic!("ball_radius on a cylinder"),
        }
    }

    /// Rescaled half length `L/ε` (cylinder domains).
    pub fn half_length(&self) -> f64 {
        match self.kind {
            DomainKind::Cylinder { half_length_base, .. } => half_length_base / self.epsilon,
            DomainKind::Ball { .. } => panic!("half_length on a ball"),
        }
    }

    /// Rescaled disk radius `𝔯/ε` (cylinder domains).
    pub fn disk_radius(&self) -> f64 {
        match self.kind {
            DomainKind::Cylinder { disk_radius_base, .. } => disk_radius_base / self.epsilon,
            DomainKind::Ball { .. } => panic!("disk_radius on a ball"),
        }
    }

    pub fn is_cylinder(&self) -> bool {
        matches!(self.kind, DomainKind::Cylinder { .. })
    }

    /// Diameter of the rescaled domain.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Ball { .. } => 2.0 * self.ball_radius(),
            DomainKind::Cylinder { .. } => {
                let l = 2.0 * self.half_length();
                let d = 2.0 * self.disk_radius();
                (l * l + d * d).sqrt()
            }
        }
    }

    pub fn boundary_tol(&self) -> f64 {
        BOUNDARY_TOL_REL * self.diameter()
    }

    pub fn edge_tol(&self) -> f64 {
        match self.kind {
            DomainKind::Cylinder { .. } => EDGE_TOL_REL * self.disk_radius(),
            DomainKind::Ball { .. } => 0.0,
        }
    }

    /// Signed distance to the boundary, positive in the interior.
    pub fn signed_distance(&self, x: Vec3) -> f64 {
        match self.kind {
            DomainKind::Ball { .. } => self.ball_radius() - x.norm(),
            DomainKind::Cylinder { .. } => {
                let ax = self.half_length() - x.x.abs();
                let lat = self.disk_radius() - x.hat_norm();
                ax.min(lat)
            }
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, x: Vec3) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Accommodation coefficient at a boundary point of the given class.
    pub fn iota(&self, class: &BoundaryClass) -> f64 {
        match self.accommodation {
            AccommodationProfile::Constant(i0) => i0,
            AccommodationProfile::CapsDiffuseLateralSpecular => match class.tag {
                BoundaryTag::Cap1 | BoundaryTag::Cap2 | BoundaryTag::SingularEdge => 1.0,
                BoundaryTag::Lateral => 0.0,
                BoundaryTag::SmoothWall => unreachable!("smooth wall on a cylinder"),
            },
        }
    }

    /// Classify a boundary point and return the outward unit normal.
    ///
    /// Cylinder points within the edge tolerance of the circle
    /// `{|x¹| = L/ε, |x̂| = 𝔯/ε}` are tagged [`BoundaryTag::SingularEdge`]
    /// (with the cap normal, which is the convention used by the elliptic
    /// discretization as well).
    pub fn outward_normal(&self, x: Vec3) -> Result<BoundaryClass> {
        let tol = self.boundary_tol();
        match self.kind {
            DomainKind::Ball { .. } => {
                let r = x.norm();
                let dist = (r - self.ball_radius()).abs();
                if dist > tol {
                    return Err(Error::NotOnBoundary { distance: dist, tolerance: tol });
                }
                Ok(BoundaryClass { tag: BoundaryTag::SmoothWall, normal: x / r })
            }
            DomainKind::Cylinder { .. } => {
                let l_eps = self.half_length();
                let r_eps = self.disk_radius();
                let rho = x.hat_norm();
                let d_cap1 = (x.x + l_eps).abs();
                let d_cap2 = (x.x - l_eps).abs();
                let d_lat = (rho - r_eps).abs();
                let inside_lat = rho <= r_eps + tol;
                let inside_ax = x.x.abs() <= l_eps + tol;

                let edge_tol = self.edge_tol();
                if d_lat <= edge_tol && d_cap1.min(d_cap2) <= edge_tol {
                    let sign = if d_cap1 <= d_cap2 { -1.0 } else { 1.0 };
                    return Ok(BoundaryClass {
                        tag: BoundaryTag::SingularEdge,
                        normal: Vec3::new(sign, 0.0, 0.0),
                    });
                }
                if d_cap1 <= tol && inside_lat {
                    return Ok(BoundaryClass { tag: BoundaryTag::Cap1, normal: Vec3::new(-1.0, 0.0, 0.0) });
                }
                if d_cap2 <= tol && inside_lat {
                    return Ok(BoundaryClass { tag: BoundaryTag::Cap2, normal: Vec3::new(1.0, 0.0, 0.0) });
                }
                if d_lat <= tol && inside_ax {
                    return Ok(BoundaryClass {
                        tag: BoundaryTag::Lateral,
                        normal: Vec3::new(0.0, x.y / rho, x.z / rho),
                    });
                }
                let dist = self.signed_distance(x).abs();
                Err(Error::NotOnBoundary { distance: dist, tolerance: tol })
            }
        }
    }

    /// First exit along the backwards ray `x - s v`, `s > 0`.
    ///
    /// For the cylinder the exit time is the minimum of the cap linear
    /// roots and the lateral quadratic root. A lateral discriminant inside
    /// the grazing window is treated as a non-intersection (the grazing
    /// set has measure zero); rays that then hit nothing within the
    /// domain are reported as numerically degenerate so callers can flag
    /// the trajectory as grazing.
    pub fn exit_time(&self, x: Vec3, v: Vec3) -> Result<Exit> {
        let speed2 = v.norm_sq();
        if speed2 == 0.0 {
            return Err(Error::ZeroVelocity);
        }
        // Tiny positive times correspond to starting on the boundary.
        let t_min = self.boundary_tol() / speed2.sqrt();

        match self.kind {
            DomainKind::Ball { .. } => {
                let r = self.ball_radius();
                // |x - s v|^2 = r^2
                let b = x.dot(v);
                let c = x.norm_sq() - r * r;
                let disc = b * b - speed2 * c;
                if disc < 0.0 {
                    return Err(Error::NumericalDegenerate { discriminant: disc });
                }
                let s = (b + disc.sqrt()) / speed2;
                if s <= t_min {
                    return Err(Error::NumericalDegenerate { discriminant: disc });
                }
                let x_exit = x - v * s;
                // project onto the sphere so the exit point is exactly on the wall
                let x_exit = x_exit * (r / x_exit.norm());
                let class = self.outward_normal(x_exit)?;
                Ok(Exit { t_b: s, x_exit, class })
            }
            DomainKind::Cylinder { .. } => {
                let l_eps = self.half_length();
                let r_eps = self.disk_radius();

                // cap roots: x¹ - s v¹ = ∓ L/ε
                let mut t_cap = f64::INFINITY;
                if v.x > 0.0 {
                    t_cap = (x.x + l_eps) / v.x; // Cap1
                } else if v.x < 0.0 {
                    t_cap = (x.x - l_eps) / v.x; // Cap2
                }

                // lateral quadratic: |x̂ - s v̂|^2 = (𝔯/ε)^2
                let vh2 = v.hat_norm_sq();
                let mut t_lat = f64::INFINITY;
                if vh2 > 0.0 {
                    let b = x.y * v.y + x.z * v.z;
                    let c = x.hat_norm_sq() - r_eps * r_eps;
                    let disc = b * b - vh2 * c;
                    let disc_tol = 1e-22 * (vh2 * r_eps * r_eps + b * b);
                    if disc >= disc_tol {
                        let s = (b + disc.sqrt()) / vh2;
                        if s > t_min {
                            t_lat = s;
                        }
                    }
                    // disc in [0, tol): grazing; treat as non-intersecting
                }

                let t_b = t_cap.min(t_lat);
                if !t_b.is_finite() || t_b <= t_min {
                    return Err(Error::NumericalDegenerate { discriminant: 0.0 });
                }
                let mut x_exit = x - v * t_b;
                if t_lat < t_cap {
                    // snap onto the lateral wall
                    let rho = x_exit.hat_norm();
                    let scale = r_eps / rho;
                    x_exit = Vec3::new(x_exit.x, x_exit.y * scale, x_exit.z * scale);
                } else {
                    // snap onto the cap plane
                    x_exit.x = if v.x > 0.0 { -l_eps } else { l_eps };
                }
                let class = self.outward_normal(x_exit)?;
                Ok(Exit { t_b, x_exit, class })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cyl_half() -> Domain {
        Domain::cylinder(1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn contains_examples() {
        let d = cyl_half();
        assert!(d.contains(Vec3::ZERO));
        // x¹ = 2 = L/ε lies on the cap, not interior
        assert!(!d.contains(Vec3::new(2.0, 0.0, 0.0)));
        let b = Domain::ball(1.0, 0.25, 1.0).unwrap();
        // |x| = 3.9 < 1/ε = 4
        assert!(b.contains(Vec3::new(3.9, 0.0, 0.0)));
    }

    #[test]
    fn normals_on_cylinder() {
        let d = cyl_half();
        let lat = d.outward_normal(Vec3::new(0.0, 2.0, 0.0)).unwrap();
        assert_eq!(lat.tag, BoundaryTag::Lateral);
        assert!((lat.normal - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);

        let cap = d.outward_normal(Vec3::new(-2.0, 0.3, 0.1)).unwrap();
        assert_eq!(cap.tag, BoundaryTag::Cap1);
        assert!((cap.normal - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);

        let edge = d.outward_normal(Vec3::new(2.0, 2.0, 0.0)).unwrap();
        assert_eq!(edge.tag, BoundaryTag::SingularEdge);
    }

    #[test]
    fn normal_rejects_interior_point() {
        let d = cyl_half();
        assert!(matches!(
            d.outward_normal(Vec3::new(0.0, 0.5, 0.0)),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn exit_time_axial_and_radial() {
        let d = cyl_half();
        let e = d.exit_time(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((e.t_b - 2.0).abs() < 1e-12);
        assert!((e.x_exit - Vec3::new(-2.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(e.class.tag, BoundaryTag::Cap1);

        let e = d.exit_time(Vec3::ZERO, Vec3::new(0.0, -1.0, 0.0)).unwrap();
        assert!((e.t_b - 2.0).abs() < 1e-12);
        assert!((e.x_exit - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        assert_eq!(e.class.tag, BoundaryTag::Lateral);
    }

    #[test]
    fn exit_time_ball_quadratic() {
        // |x - t v| = 1 with x = (0.5,0,0), v = (1,0,0): t = 1.5, exit (-1,0,0)
        let d = Domain::ball(1.0, 1.0, 1.0).unwrap();
        let e = d.exit_time(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((e.t_b - 1.5).abs() < 1e-12);
        assert!((e.x_exit - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(e.class.tag, BoundaryTag::SmoothWall);
    }

    #[test]
    fn zero_velocity_is_an_error() {
        let d = cyl_half();
        assert!(matches!(d.exit_time(Vec3::ZERO, Vec3::ZERO), Err(Error::ZeroVelocity)));
    }

    #[test]
    fn iota_profile_on_cylinder() {
        let d = cyl_half();
        let cap = d.outward_normal(Vec3::new(2.0, 0.0, 0.0)).unwrap();
        let lat = d.outward_normal(Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(d.iota(&cap), 1.0);
        assert_eq!(d.iota(&lat), 0.0);
    }

    proptest! {
        #[test]
        fn ray_is_interior_before_exit(
            xs in (-0.8f64..0.8, -0.6f64..0.6, -0.6f64..0.6),
            vs in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let d = cyl_half();
            let x = Vec3::new(xs.0 * 2.0, xs.1 * 1.4, xs.2 * 1.4);
            let v = Vec3::new(vs.0, vs.1, vs.2);
            prop_assume!(v.norm() > 1e-3);
            prop_assume!(d.contains(x));
            let e = d.exit_time(x, v).unwrap();
            // dense sampling of the open segment
            for k in 1..50 {
                let s = e.t_b * (k as f64) / 50.0;
                prop_assert!(d.signed_distance(x - v * s) > -d.boundary_tol());
            }
            prop_assert!(d.signed_distance(e.x_exit).abs() <= d.boundary_tol());
        }

        #[test]
        fn exit_time_scale_covariance(
            lambda in 0.3f64..3.0,
            vs in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let v = Vec3::new(vs.0, vs.1, vs.2);
            prop_assume!(v.norm() > 1e-3);
            let x = Vec3::new(0.3, -0.2, 0.5);
            let d = cyl_half();
            let d_scaled = Domain::cylinder(1.0, 1.0, d.epsilon / lambda).unwrap();
            let e = d.exit_time(x, v).unwrap();
            let e_scaled = d_scaled.exit_time(x * lambda, v).unwrap();
            prop_assert!((e.t_b - e_scaled.t_b / lambda).abs() < 1e-9 * e.t_b.max(1.0));
        }
    }
}
