//! Piecewise-defined admissible input trajectories.
//!
//! Signals are immutable after construction. Evaluation is right-continuous:
//! at a segment boundary the later segment wins.

use crate::domain::Interval;
use crate::error::{Error, Result};
use crate::groups::TransformationGroup;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Hold the previous node's value (right-continuous step function).
    Hold,
}

#[derive(Clone)]
pub enum Generator {
    Constant(f64),
    /// `offset + amplitude * sin(omega * t + phase)` in absolute time.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `offset + slope * t` in absolute time.
    Ramp { offset: f64, slope: f64 },
    /// Sampled table with an interpolation rule. Outside the node range the
    /// nearest node's value is held, so long integrations stay bounded.
    Table {
        points: Vec<(f64, f64)>,
        interpolation: Interpolation,
    },
    /// Smooth day/night light profile with the given period:
    /// `night + (day - night) * max(0, sin(2 pi t / period))^2`.
    /// Light is on for the first half of each period.
    DayNight { period: f64, night: f64, day: f64 },
    /// Pointwise-transformed wrapper: evaluates to `pi_p(inner(t))`.
    Transformed {
        group: TransformationGroup,
        p: f64,
        inner: Box<InputSignal>,
    },
}

impl Generator {
    fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Generator::Constant(v) => Ok(*v),
            Generator::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => Ok(offset + amplitude * (omega * t + phase).sin()),
            Generator::Ramp { offset, slope } => Ok(offset + slope * t),
            Generator::Table {
                points,
                interpolation,
            } => Ok(eval_table(points, *interpolation, t)),
            Generator::DayNight { period, night, day } => {
                let s = (2.0 * std::f64::consts::PI * t / period).sin().max(0.0);
                Ok(night + (day - night) * s * s)
            }
            Generator::Transformed { group, p, inner } => {
                let v = inner.eval_unchecked(t)?;
                group.domain.check(group.apply(*p, v))
            }
        }
    }

    /// Times in `(t0, t1)` where this generator is not smooth.
    fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        match self {
            Generator::Table { points, .. } => {
                out.extend(points.iter().map(|&(t, _)| t).filter(|&t| t > t0 && t < t1));
            }
            Generator::DayNight { period, .. } => {
                // kinks where the sine crosses zero, every half period
                let half = period / 2.0;
                let mut k = (t0 / half).floor() as i64;
                loop {
                    let t = k as f64 * half;
                    if t >= t1 {
                        break;
                    }
                    if t > t0 {
                        out.push(t);
                    }
                    k += 1;
                }
            }
            Generator::Transformed { inner, .. } => {
                out.extend(inner.breakpoints(t0, t1));
            }
            _ => {}
        }
    }
}

fn eval_table(points: &[(f64, f64)], interpolation: Interpolation, t: f64) -> f64 {
    debug_assert!(!points.is_empty());
    if t <= points[0].0 {
        return points[0].1;
    }
    if t >= points[points.len() - 1].0 {
        return points[points.len() - 1].1;
    }
    // first node with node.t > t
    let idx = points.partition_point(|&(tn, _)| tn <= t);
    let (t0, v0) = points[idx - 1];
    let (t1, v1) = points[idx];
    match interpolation {
        Interpolation::Hold => v0,
        Interpolation::Linear => v0 + (v1 - v0) * (t - t0) / (t1 - t0),
    }
}

#[derive(Clone)]
pub struct Segment {
    pub start: f64,
    pub generator: Generator,
}

/// A piecewise-defined admissible input trajectory `u(.)`, defined for all
/// `t >= 0` and taking values in its domain interval `U`.
#[derive(Clone)]
pub struct InputSignal {
    segments: Vec<Segment>,
    domain: Interval,
}

impl InputSignal {
    pub fn new(segments: Vec<Segment>, domain: Interval) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("signal needs at least one segment".into()));
        }
        if segments[0].start > 0.0 {
            return Err(Error::InvalidArgument(
                "first segment must start at t <= 0 so the signal covers all t >= 0".into(),
            ));
        }
        for w in segments.windows(2) {
            if w[1].start <= w[0].start {
                return Err(Error::InvalidArgument(
                    "segment start times must be strictly increasing".into(),
                ));
            }
        }
        if let Generator::Table { points, .. } = &segments[0].generator {
            if points.is_empty() {
                return Err(Error::InvalidArgument("table needs at least one node".into()));
            }
        }
        for s in &segments {
            if let Generator::Table { points, .. } = &s.generator {
                if points.is_empty() {
                    return Err(Error::InvalidArgument("table needs at least one node".into()));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidArgument(
                            "table node times must be strictly increasing".into(),
                        ));
                    }
                }
            }
        }
        Ok(InputSignal { segments, domain })
    }

    pub fn from_generator(generator: Generator, domain: Interval) -> Result<Self> {
        Self::new(
            vec![Segment {
                start: 0.0,
                generator,
            }],
            domain,
        )
    }

    pub fn constant(v: f64) -> Self {
        Self::from_generator(Generator::Constant(v), Interval::REAL).unwrap()
    }

    pub fn sinusoid(offset: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        Self::from_generator(
            Generator::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            },
            Interval::REAL,
        )
        .unwrap()
    }

    pub fn ramp(offset: f64, slope: f64) -> Self {
        Self::from_generator(Generator::Ramp { offset, slope }, Interval::REAL).unwrap()
    }

    pub fn table(points: Vec<(f64, f64)>, interpolation: Interpolation) -> Result<Self> {
        Self::from_generator(
            Generator::Table {
                points,
                interpolation,
            },
            Interval::REAL,
        )
    }

    /// The documented default day/night profile: 24 time-unit period, light
    /// during the first 12.
    pub fn day_night(period: f64, night: f64, day: f64) -> Self {
        Self::from_generator(Generator::DayNight { period, night, day }, Interval::REAL)
            .unwrap()
    }

    pub fn with_domain(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Evaluate at `t >= 0`. At a segment boundary the later segment wins.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.domain.check(self.eval_unchecked(t)?)
    }

    fn eval_unchecked(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments[idx - 1].generator.eval(t)
    }

    /// Sorted times in `(t0, t1)` where the signal may be discontinuous or
    /// non-smooth: segment starts, table nodes, day/night kinks.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            if s.start > t0 && s.start < t1 {
                out.push(s.start);
            }
            let seg_end = self
                .segments
                .get(i + 1)
                .map(|n| n.start)
                .unwrap_or(f64::INFINITY);
            s.generator
                .breakpoints(t0.max(s.start), t1.min(seg_end), &mut out);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }
}

/// The pointwise transformation `pi_p(u)(t) = pi_p(u(t))` of a trajectory.
/// The result takes values in the group's domain, checked at evaluation time.
pub fn transform_signal(
    group: &TransformationGroup,
    p: f64,
    signal: &InputSignal,
) -> InputSignal {
    InputSignal {
        segments: vec![Segment {
            start: 0.0,
            generator: Generator::Transformed {
                group: group.clone(),
                p,
                inner: Box::new(signal.clone()),
            },
        }],
        domain: group.domain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_eval() {
        assert_relative_eq!(InputSignal::constant(0.25).eval(7.3).unwrap(), 0.25);
    }

    #[test]
    fn ramp_eval() {
        assert_relative_eq!(InputSignal::ramp(1.0, 2.0).eval(3.0).unwrap(), 7.0);
    }

    #[test]
    fn table_linear_interpolation() {
        let s = InputSignal::table(vec![(0.0, 0.0), (1.0, 2.0)], Interpolation::Linear).unwrap();
        assert_relative_eq!(s.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn table_holds_last_value() {
        let s = InputSignal::table(vec![(0.0, 0.0), (1.0, 2.0)], Interpolation::Linear).unwrap();
        assert_relative_eq!(s.eval(5.0).unwrap(), 2.0);
        let s = InputSignal::table(vec![(1.0, 3.0), (2.0, 5.0)], Interpolation::Hold).unwrap();
        assert_relative_eq!(s.eval(0.5).unwrap(), 3.0);
        assert_relative_eq!(s.eval(1.5).unwrap(), 3.0);
        assert_relative_eq!(s.eval(2.5).unwrap(), 5.0);
    }

    #[test]
    fn negative_time_is_rejected() {
        assert!(matches!(
            InputSignal::constant(1.0).eval(-0.1),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn boundary_is_right_continuous() {
        let s = InputSignal::new(
            vec![
                Segment {
                    start: 0.0,
                    generator: Generator::Constant(1.0),
                },
                Segment {
                    start: 2.0,
                    generator: Generator::Constant(5.0),
                },
            ],
            Interval::REAL,
        )
        .unwrap();
        assert_relative_eq!(s.eval(2.0).unwrap(), 5.0);
        assert_relative_eq!(s.eval(2.0 - 1e-12).unwrap(), 1.0);
        assert_eq!(s.breakpoints(0.0, 10.0), vec![2.0]);
    }

    #[test]
    fn scaling_transform_of_constant() {
        let g = TransformationGroup::scaling();
        let s = InputSignal::constant(0.25);
        let t = transform_signal(&g, 2.0f64.ln(), &s);
        assert_relative_eq!(t.eval(3.0).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn translation_transform_of_sinusoid() {
        let g = TransformationGroup::translation();
        let s = InputSignal::sinusoid(0.0, 1.0, 1.0, 0.0);
        let t = transform_signal(&g, 1.0, &s);
        for k in 0..10 {
            let tt = 0.37 * k as f64;
            assert_relative_eq!(t.eval(tt).unwrap(), tt.sin() + 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn transforms_compose_additively() {
        let g = TransformationGroup::scaling();
        let s = InputSignal::constant(1.0);
        let twice = transform_signal(&g, 3.0f64.ln(), &transform_signal(&g, 2.0f64.ln(), &s));
        let once = transform_signal(&g, 2.0f64.ln() + 3.0f64.ln(), &s);
        for k in 0..5 {
            let t = 1.3 * k as f64;
            assert_relative_eq!(twice.eval(t).unwrap(), 6.0, max_relative = 1e-12);
            assert_relative_eq!(
                twice.eval(t).unwrap(),
                once.eval(t).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn transformed_value_leaving_domain_errors_at_eval() {
        let g = TransformationGroup::translation();
        // translation's natural domain is all of R; restrict it to model an
        // input space of positive values
        let g = TransformationGroup::new("shift-positive", Interval::POSITIVE, move |p, u| {
            g.apply(p, u)
        });
        let s = InputSignal::constant(0.5);
        let t = transform_signal(&g, -1.0, &s);
        assert!(matches!(t.eval(0.0), Err(Error::DomainValue { .. })));
    }

    #[test]
    fn day_night_profile_and_breakpoints() {
        let s = InputSignal::day_night(24.0, 0.2, 1.2);
        assert_relative_eq!(s.eval(6.0).unwrap(), 1.2, max_relative = 1e-12);
        assert_relative_eq!(s.eval(18.0).unwrap(), 0.2, max_relative = 1e-12);
        assert_eq!(s.breakpoints(0.0, 49.0), vec![12.0, 24.0, 36.0, 48.0]);
    }

    #[test]
    fn invalid_segments_are_rejected() {
        assert!(InputSignal::new(vec![], Interval::REAL).is_err());
        let bad = InputSignal::new(
            vec![
                Segment {
                    start: 1.0,
                    generator: Generator::Constant(0.0),
                },
                Segment {
                    start: 1.0,
                    generator: Generator::Constant(1.0),
                },
            ],
            Interval::REAL,
        );
        assert!(bad.is_err());
    }
}
