//! Built-in example systems: a scale-invariant feed-forward loop, a bistable
//! switch (with two inequivalent normal forms) and a circadian oscillator
//! given directly in normal form. Default parameters match the reference
//! simulations in the test suite.

use nalgebra::{DMatrix, DVector};

use crate::domain::Interval;
use crate::dynamics::DynamicalSystem;
use crate::groups::{StateTransformationFamily, TransformationGroup};
use crate::normalform::{CoordinateChange, CrossSection, NormalFormSystem};
use crate::signals::InputSignal;

/// Everything needed to study one system: its original coordinates, the
/// input group with its state-transformation witness, the coordinate change
/// into normal form, the normal form itself and the cross-section that
/// rectification uses to rediscover the coordinate change.
pub struct Bundle {
    pub original: DynamicalSystem,
    pub group: TransformationGroup,
    pub family: StateTransformationFamily,
    pub delta: CoordinateChange,
    pub normal_form: NormalFormSystem,
    pub section: CrossSection,
}

#[derive(Debug, Clone, Copy)]
pub struct FeedForwardParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for FeedForwardParams {
    fn default() -> Self {
        FeedForwardParams {
            a: 1.0,
            b: 4.0,
            c: 10.0,
            d: 4.0,
        }
    }
}

impl FeedForwardParams {
    pub fn validate(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.c > 0.0 && self.d > 0.0
    }
}

/// Incoherent feed-forward loop
/// `dx/dt = -a x + b u`, `dy/dt = c u/(x + u) - d y`, output `y`.
///
/// Scaling the input scales `x` and leaves `y` untouched, so the system is
/// scale-invariant. The normal form coordinates are `z = y`, `p_hat = log x`.
pub fn feedforward_bundle(params: FeedForwardParams) -> Bundle {
    assert!(params.validate(), "feed-forward rates must be positive");
    let FeedForwardParams { a, b, c, d } = params;
    let original = DynamicalSystem::new(
        "feed-forward loop",
        2,
        vec![Interval::POSITIVE, Interval::REAL],
        move |x, u| {
            DVector::from_vec(vec![
                -a * x[0] + b * u,
                c * u / (x[0] + u) - d * x[1],
            ])
        },
        |x| x[1],
    );
    let group = TransformationGroup::scaling();
    let family = StateTransformationFamily::scaling_mask(2, &[true, false]);
    let delta = CoordinateChange::new(
        |x: &DVector<f64>| DVector::from_vec(vec![x[1], x[0].ln()]),
        |w: &DVector<f64>| DVector::from_vec(vec![w[1].exp(), w[0]]),
    )
    .with_jacobian(|x: &DVector<f64>| {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 / x[0], 0.0])
    });
    let normal_form = NormalFormSystem::new(
        "feed-forward loop",
        group.clone(),
        1,
        vec![Interval::REAL],
        move |z, u_hat| DVector::from_vec(vec![c * u_hat / (1.0 + u_hat) - d * z[0]]),
        move |_, u_hat| -a + b * u_hat,
        |z| z[0],
    );
    let section = CrossSection::new(|x| x[0] - 1.0, |x| DVector::from_vec(vec![x[1]]));
    Bundle {
        original,
        group,
        family,
        delta,
        normal_form,
        section,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BistableParams {
    pub v1: f64,
    pub v2: f64,
    pub vy: f64,
    pub k1: f64,
    pub k2: f64,
    pub ky: f64,
}

impl Default for BistableParams {
    fn default() -> Self {
        BistableParams {
            v1: 1.0,
            v2: 0.1,
            vy: 3.5,
            k1: 0.15,
            k2: 0.1,
            ky: 2.0,
        }
    }
}

impl BistableParams {
    pub fn validate(&self) -> bool {
        [self.v1, self.v2, self.vy, self.k1, self.k2, self.ky]
            .iter()
            .all(|&v| v > 0.0)
    }
}

/// The bistable switch together with both normal forms. Same input group and
/// original system as [`Bundle`], but the choice of anchor coordinate
/// (`log x2` versus `log x1`) yields two inequivalent variable parts with
/// different transmissible-input sets.
pub struct BistableBundle {
    pub original: DynamicalSystem,
    pub group: TransformationGroup,
    pub family: StateTransformationFamily,
    /// `(x1/x2, y, log x2)`
    pub delta_1: CoordinateChange,
    pub normal_form_1: NormalFormSystem,
    /// `(x1/x2, y, log x1)`
    pub delta_2: CoordinateChange,
    pub normal_form_2: NormalFormSystem,
    /// Section for `delta_1`: `{x2 = 1}`.
    pub section: CrossSection,
}

/// Bistable switch
/// `dx1/dt = v1 u - k1 x1 - y x1`, `dx2/dt = v2 u - k2 x2`,
/// `dy/dt = vy/(1 + (x1/x2)^2) - ky y`, output `y`.
pub fn bistable_bundle(params: BistableParams) -> BistableBundle {
    assert!(params.validate(), "bistable rates must be positive");
    let BistableParams {
        v1,
        v2,
        vy,
        k1,
        k2,
        ky,
    } = params;
    let original = DynamicalSystem::new(
        "bistable switch",
        3,
        vec![Interval::POSITIVE, Interval::POSITIVE, Interval::REAL],
        move |x, u| {
            let r = x[0] / x[1];
            DVector::from_vec(vec![
                v1 * u - k1 * x[0] - x[2] * x[0],
                v2 * u - k2 * x[1],
                vy / (1.0 + r * r) - ky * x[2],
            ])
        },
        |x| x[2],
    );
    let group = TransformationGroup::scaling();
    let family = StateTransformationFamily::scaling_mask(3, &[true, true, false]);
    let z_domain = vec![Interval::POSITIVE, Interval::REAL];

    let delta_1 = CoordinateChange::new(
        |x: &DVector<f64>| DVector::from_vec(vec![x[0] / x[1], x[2], x[1].ln()]),
        |w: &DVector<f64>| DVector::from_vec(vec![w[0] * w[2].exp(), w[2].exp(), w[1]]),
    )
    .with_jacobian(|x: &DVector<f64>| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0 / x[1],
                -x[0] / (x[1] * x[1]),
                0.0,
                0.0,
                0.0,
                1.0,
                0.0,
                1.0 / x[1],
                0.0,
            ],
        )
    });
    let normal_form_1 = NormalFormSystem::new(
        "bistable switch, anchored at x2",
        group.clone(),
        2,
        z_domain.clone(),
        move |z, u_hat| {
            DVector::from_vec(vec![
                v1 * u_hat - k1 * z[0] - z[1] * z[0] - z[0] * (v2 * u_hat - k2),
                vy / (1.0 + z[0] * z[0]) - ky * z[1],
            ])
        },
        move |_, u_hat| v2 * u_hat - k2,
        |z| z[1],
    );

    let delta_2 = CoordinateChange::new(
        |x: &DVector<f64>| DVector::from_vec(vec![x[0] / x[1], x[2], x[0].ln()]),
        |w: &DVector<f64>| {
            let x1 = w[2].exp();
            DVector::from_vec(vec![x1, x1 / w[0], w[1]])
        },
    )
    .with_jacobian(|x: &DVector<f64>| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0 / x[1],
                -x[0] / (x[1] * x[1]),
                0.0,
                0.0,
                0.0,
                1.0,
                1.0 / x[0],
                0.0,
                0.0,
            ],
        )
    });
    let normal_form_2 = NormalFormSystem::new(
        "bistable switch, anchored at x1",
        group.clone(),
        2,
        z_domain,
        move |z, u_tilde| {
            DVector::from_vec(vec![
                z[0] * (v1 * u_tilde - k1 - z[1]) - z[0] * (v2 * z[0] * u_tilde - k2),
                vy / (1.0 + z[0] * z[0]) - ky * z[1],
            ])
        },
        move |z, u_tilde| v1 * u_tilde - k1 - z[1],
        |z| z[1],
    );
    let section = CrossSection::new(
        |x| x[1] - 1.0,
        |x| DVector::from_vec(vec![x[0] / x[1], x[2]]),
    );
    BistableBundle {
        original,
        group,
        family,
        delta_1,
        normal_form_1,
        delta_2,
        normal_form_2,
        section,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CircadianParams {
    /// Phosphorylation chain length.
    pub big_n: usize,
    pub k_tl: f64,
    pub k_dc: f64,
    pub k_dp: f64,
    pub k_dm: f64,
    pub v_c: f64,
    pub v_p: f64,
    pub k_p: f64,
    /// Hill exponent of the inhibition.
    pub n: f64,
    /// Gauge exponent of the anchor.
    pub alpha: f64,
    /// Insert the `k_p` prefactor on the generic per-protein chain line, for
    /// symmetry with the cry chain. Off by default: the reference equations
    /// are taken literally.
    pub per_chain_kp: bool,
}

impl Default for CircadianParams {
    fn default() -> Self {
        CircadianParams {
            big_n: 4,
            k_tl: 0.25,
            k_dc: 0.25,
            k_dp: 0.25,
            k_dm: 0.5,
            v_c: 0.01,
            v_p: 0.01,
            k_p: 0.5,
            n: 2.0,
            alpha: -1.5,
            per_chain_kp: false,
        }
    }
}

impl CircadianParams {
    pub fn validate(&self) -> bool {
        self.big_n >= 2
            && [
                self.k_tl, self.k_dc, self.k_dp, self.k_dm, self.v_c, self.v_p, self.k_p,
            ]
            .iter()
            .all(|&v| v > 0.0)
            && self.n > 0.0
            && self.alpha.is_finite()
    }
}

/// Circadian oscillator, given directly in normal form over the scaling
/// group. The `z` state stacks the phosphorylation chain of the per protein,
/// the cry mRNA and the cry chain: `(z_P1 .. z_PN, z_Cm, z_C1 .. z_CN)`,
/// dimension `2N + 1`. The output is the cry mRNA channel.
pub fn circadian_normal_form(params: CircadianParams) -> NormalFormSystem {
    assert!(params.validate(), "invalid circadian parameters");
    let big_n = params.big_n;
    let m = 2 * big_n + 1;
    let p = params;
    // indices into z
    let zp = move |k: usize| k - 1; // z_P,k for k = 1..N
    let zcm = big_n;
    let zc = move |k: usize| big_n + k; // z_C,k for k = 1..N

    let omega = move |z: &DVector<f64>, u_hat: f64| -> f64 {
        let zpn = z[zp(big_n)];
        let zcn = z[zc(big_n)];
        p.v_p * zcn.powf(p.alpha) * u_hat / (zpn.powf(p.n) * zcn.powf(p.n)) - p.k_dm
    };

    NormalFormSystem::new(
        "circadian oscillator",
        TransformationGroup::scaling(),
        m,
        vec![Interval::POSITIVE; m],
        move |z, u_hat| {
            let om = omega(z, u_hat);
            let mut dz = DVector::zeros(m);
            let chain_kp = if p.per_chain_kp { p.k_p } else { 1.0 };
            dz[zp(1)] = p.k_tl - z[zp(1)] * (p.k_p + p.k_dp + om);
            for k in 2..big_n {
                dz[zp(k)] = chain_kp * z[zp(k - 1)] - z[zp(k)] * (p.k_p + p.k_dp + om);
            }
            dz[zp(big_n)] = p.k_p * z[zp(big_n - 1)] - z[zp(big_n)] * (p.k_dp + om);
            let hill = p.n / (p.n + 1.0) * om;
            dz[zcm] = p.v_c / (z[zc(big_n)].powf(p.n) * z[zp(big_n)].powf(p.n))
                - z[zcm] * (p.k_dm - hill);
            dz[zc(1)] = p.k_tl * z[zcm] - z[zc(1)] * (p.k_p + p.k_dc - hill);
            for k in 2..big_n {
                dz[zc(k)] = p.k_p * z[zc(k - 1)] - z[zc(k)] * (p.k_p + p.k_dc - hill);
            }
            dz[zc(big_n)] = p.k_p * z[zc(big_n - 1)] - z[zc(big_n)] * (p.k_dc - hill);
            dz
        },
        move |z, u_hat| {
            let om = omega(z, u_hat);
            (2.0 * p.n + 1.0 + p.alpha * p.n) / (p.n + 1.0) * om
                + p.alpha * (p.k_p * z[zc(big_n - 1)] / z[zc(big_n)] - p.k_dc)
        },
        move |z| z[zcm],
    )
}

/// A smooth 24h day/night light profile: `night` during the dark half period
/// and `night + (day - night) sin(2 pi t / period)^2` during the light half.
pub fn day_night_input(period: f64, night: f64, day: f64) -> InputSignal {
    InputSignal::day_night(period, night, day)
}

/// The default circadian drive: 24h period, dim nights at 0.2, days at 1.2.
pub fn default_day_night_input() -> InputSignal {
    day_night_input(24.0, 0.2, 1.2)
}
