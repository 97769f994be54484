use proptest::prelude::*;

use lcsk_core::deformation::svd2;
use lcsk_core::dynamics::{LinearSaddle, NonlinearSaddle, SphereRotation, VelocityField};
use lcsk_core::flowmap::FlowProblem;
use lcsk_core::geometry::{
    gram_of, metric_representation, Chart, EuclideanChart, Rect, SphereChart, DEFAULT_POLE_CLAMP,
};
use lcsk_core::lcs::{integrate_line_field, reversed, LineField};
use lcsk_core::{Mat2, Point2, Vec2};

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![-10.0..10.0f64, -1e-3..1e-3f64]
}

fn matrix() -> impl Strategy<Value = Mat2> {
    (entry(), entry(), entry(), entry())
        .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
        .prop_filter("nonsingular", |m| {
            m.det().abs() > 1e-12 * m.frobenius().powi(2)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn svd_reconstructs_and_is_orthonormal(m in matrix()) {
        let s = svd2(m).unwrap();
        let scale = m.frobenius();
        prop_assert!(0.0 < s.sigma1 && s.sigma1 <= s.sigma2);
        prop_assert!((s.sigma1 * s.sigma2 - m.det().abs()).abs() <= 1e-10 * scale * scale);
        for v in [s.xi1, s.xi2, s.theta1, s.theta2] {
            prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(s.xi1.dot(s.xi2).abs() <= 1e-10);
        prop_assert!(s.theta1.dot(s.theta2).abs() <= 1e-10);
        prop_assert!((s.reconstruct() - m).frobenius() <= 1e-10 * scale);
        prop_assert!((m.mul_vec(s.xi2) - s.theta2 * s.sigma2).norm() <= 1e-10 * scale);
        prop_assert!((m.mul_vec(s.xi1) - s.theta1 * s.sigma1).norm() <= 1e-10 * scale);
    }

    #[test]
    fn sphere_modulus_squares_to_gramian(
        radius in 0.1..10.0f64,
        phi in -10.0..10.0f64,
        lat in -1.0..1.0f64,
    ) {
        let s = SphereChart::new(radius, DEFAULT_POLE_CLAMP).unwrap();
        let p = Point2::new(phi, lat * (std::f64::consts::FRAC_PI_2 - DEFAULT_POLE_CLAMP));
        let g = s.gramian(p).unwrap();
        let m = s.modulus(p).unwrap().to_mat();
        let r2 = radius * radius;
        prop_assert!(((m * m) - g.to_mat()).frobenius() <= 1e-12 * r2);
        let c = p.y.cos();
        let closed = Mat2::diag(r2 * c * c, r2);
        prop_assert!((g.to_mat() - closed).frobenius() <= 1e-12 * r2);
        prop_assert!((gram_of(&s.pushforward(p)).to_mat() - closed).frobenius() <= 1e-12 * r2);
    }

    #[test]
    fn euclidean_metric_representation_is_identity(m in matrix(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let e = EuclideanChart::default();
        let r = metric_representation(&e, Point2::new(x, y), Point2::new(y, x), m).unwrap();
        prop_assert_eq!(r, m);
    }

    #[test]
    fn line_integration_is_orientation_invariant(
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        sx in -0.5..0.5f64,
        sy in -0.5..0.5f64,
    ) {
        struct Swirl { a: f64, b: f64, sign: f64 }
        impl LineField for Swirl {
            fn direction(&self, p: Point2) -> Option<Vec2> {
                let t = self.a * p.x + self.b * p.y * p.y;
                Some(Vec2::new(t.cos(), t.sin()) * self.sign)
            }
            fn domain(&self) -> Rect {
                Rect::new(-1.0, 1.0, -1.0, 1.0)
            }
        }
        let seed = Point2::new(sx, sy);
        let c1 = integrate_line_field(&Swirl { a, b, sign: 1.0 }, seed, 0.01, 1.0).unwrap();
        let c2 = integrate_line_field(&Swirl { a, b, sign: -1.0 }, seed, 0.01, 1.0).unwrap();
        let r = reversed(&c2);
        prop_assert_eq!(c1.vertices.len(), r.vertices.len());
        prop_assert_eq!(c1.stops, r.stops);
        for (p, q) in c1.vertices.iter().zip(&r.vertices) {
            prop_assert!(p.dist(*q) <= 1e-12);
        }
    }
}

fn fd_error<V: VelocityField>(field: &V, x: Point2, t: f64, h: f64) -> f64 {
    let p = FlowProblem::new(field, Rect::UNBOUNDED, 0.0, t);
    let reference = p.deformation_gradient_variational(x).unwrap().1;
    (p.with_fd_step(h).deformation_gradient_fd(x).unwrap() - reference).frobenius()
}

#[test]
fn fd_jacobian_converges_at_second_order() {
    let saddle = NonlinearSaddle::default();
    for x in [
        Point2::new(0.3, 0.4),
        Point2::new(-0.6, 0.2),
        Point2::new(0.1, -0.8),
    ] {
        let coarse = fd_error(&saddle, x, 1.0, 0.1);
        let fine = fd_error(&saddle, x, 1.0, 0.05);
        let ratio = coarse / fine;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "{x:?}: {coarse} / {fine} = {ratio}"
        );
    }
    // Linear flows have exact central differences at every step size.
    let lin = LinearSaddle::new(0.3);
    let rot = SphereRotation::new(0.7);
    for h in [0.1, 1e-3, 1e-5] {
        assert!(fd_error(&lin, Point2::new(0.4, -0.3), 1.0, h) <= 1e-8);
        assert!(fd_error(&rot, Point2::new(0.4, -0.3), 2.0, h) <= 1e-10);
    }
}

#[test]
fn fd_and_variational_agree_on_builtin_fields() {
    let fields: [&dyn Fn(Point2) -> f64; 3] = [
        &|x| fd_error(&NonlinearSaddle::default(), x, 1.0, 1e-5),
        &|x| fd_error(&LinearSaddle::new(0.3), x, 1.0, 1e-5),
        &|x| fd_error(&SphereRotation::new(1.0), x, 1.0, 1e-5),
    ];
    for f in fields {
        for x in [Point2::new(0.2, 0.1), Point2::new(-0.5, 0.7)] {
            assert!(f(x) <= 1e-7, "{}", f(x));
        }
    }
}
