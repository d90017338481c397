use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use holoflow_bench::{orbit_seed, probe_point, xi};
use holoflow_core::flow::{self, TimeRay};
use holoflow_core::hamiltonian::{integrate_hamiltonian, SensitivityBundle};
use holoflow_core::surface::{trace_surface, ContinuationOpts, PmPolynomial, TimeLattice};
use holoflow_core::{
    covariant_derivative, integrate_ray, metric_frame, Direction, HoloFunction, Tolerances,
    VectorFieldSpec, ZeroTable,
};

fn bench_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("eval_all");
    let z = probe_point();
    for m in [4usize, 40] {
        let h = xi(m);
        group.bench_function(format!("xi_approx_m{m}"), |b| {
            b.iter(|| h.eval_all(black_box(z)).unwrap())
        });
    }
    group.bench_function("cosh_shift", |b| {
        let h = HoloFunction::CoshShift;
        b.iter(|| h.eval_all(black_box(Complex64::new(0.7, 1.3))).unwrap())
    });
    group.finish();
}

fn bench_flows(c: &mut Criterion) {
    let tol = Tolerances::default();
    c.bench_function("integrate_ray_cosh_span10", |b| {
        let h = HoloFunction::CoshShift;
        let z0 = Complex64::new(0.5, std::f64::consts::FRAC_PI_4);
        b.iter(|| integrate_ray(&h, black_box(z0), TimeRay::real(10.0), tol, 1e6).unwrap())
    });
    c.bench_function("closed_orbit_h8", |b| {
        let h = xi(4);
        b.iter(|| flow::closed_orbit(&h, black_box(orbit_seed()), tol, 1e3).unwrap())
    });
    c.bench_function("integrate_hamiltonian_h8_span1", |b| {
        let h = xi(4);
        let bundle = SensitivityBundle::new(
            orbit_seed(),
            Complex64::new(0.7, 0.2),
            Complex64::new(0.1, -0.4),
            Complex64::new(0.3, 0.9),
        );
        b.iter(|| integrate_hamiltonian(&h, &bundle, TimeRay::real(1.0), tol).unwrap())
    });
}

fn bench_surface(c: &mut Criterion) {
    let mut group = c.benchmark_group("pm_roots");
    let z0 = probe_point();
    for m in [4usize, 10] {
        let p = PmPolynomial::new(ZeroTable::bundled(), m, z0, Complex64::new(0.4, 0.9)).unwrap();
        group.bench_function(format!("m{m}"), |b| b.iter(|| p.roots().unwrap()));
    }
    group.finish();
    c.bench_function("trace_surface_m4_imag_ray_65", |b| {
        let z0 = orbit_seed();
        b.iter(|| {
            let lattice = TimeLattice::ray_imag(2.0 * std::f64::consts::PI, 65).unwrap();
            trace_surface(
                ZeroTable::bundled(),
                4,
                black_box(z0),
                lattice,
                ContinuationOpts::default(),
            )
            .unwrap()
        })
    });
}

fn bench_geometry(c: &mut Criterion) {
    let h = xi(4);
    let z = probe_point();
    c.bench_function("metric_frame_h8", |b| {
        b.iter(|| metric_frame(&h, black_box(z)).unwrap())
    });
    c.bench_function("covariant_derivative_h8", |b| {
        let field = VectorFieldSpec::LinearComb { a: 0.3, b: -1.1 };
        b.iter(|| covariant_derivative(&h, &field, Direction::AlongH, black_box(z)).unwrap())
    });
}

criterion_group!(benches, bench_eval, bench_flows, bench_surface, bench_geometry);
criterion_main!(benches);
