use proptest::prelude::*;
use vsi_ssa::params::ConverterParams;
use vsi_ssa::steady_state::{
    residuals, solve_duty_d, solve_duty_q, solve_inductor_current_d, OperatingPoint,
};

fn arb_params() -> impl Strategy<Value = ConverterParams> {
    (
        10.0..800.0f64,
        0.1..50.0f64,
        0.05..0.6f64,
        -0.05..0.05f64,
        1e-5..1e-2f64,
        (0.0..0.2f64, 0.0..0.2f64, 0.0..0.2f64),
        40.0..400.0f64,
    )
        .prop_map(
            |(u_in, i_in, ratio, q_ratio, l, (r_l, r_on, r_s), f_grid)| ConverterParams {
                f_sw: 200.0 * f_grid,
                f_grid,
                u_in,
                i_in,
                u_od: ratio * u_in,
                u_oq: q_ratio * u_in,
                inductance: l,
                r_l,
                r_on,
                r_s,
            },
        )
}

fn solve(p: &ConverterParams) -> OperatingPoint {
    let d_d = solve_duty_d(p).unwrap();
    OperatingPoint {
        d_d,
        d_q: solve_duty_q(p, d_d).unwrap(),
        d_0: 0.5,
        i_ld: solve_inductor_current_d(p, d_d).unwrap(),
        i_lq: 0.0,
        u_oq_set: p.u_oq,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn balances_vanish(p in arb_params()) {
        let r = residuals(&p, &solve(&p));
        prop_assert!(r.max_abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn dc_power_equals_grid_power_plus_losses(p in arb_params()) {
        let op = solve(&p);
        let dc = p.u_in * p.i_in;
        let ac = 1.5 * p.u_od * op.i_ld + 1.5 * p.u_oq * op.i_lq
            + 1.5 * p.r_eq() * (op.i_ld * op.i_ld + op.i_lq * op.i_lq);
        prop_assert!((dc - ac).abs() <= 1e-9 * dc, "{dc} vs {ac}");
    }

    #[test]
    fn duty_d_is_at_least_the_lossless_value(p in arb_params()) {
        prop_assert!(solve_duty_d(&p).unwrap() >= p.u_od / p.u_in);
    }
}
