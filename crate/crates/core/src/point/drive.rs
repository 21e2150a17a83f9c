use std::f64::consts::TAU;

/// A prescribed drive: field values and their time derivatives.
pub trait Drive {
    fn electric(&self, t: f64) -> f64;
    fn electric_rate(&self, t: f64) -> f64;
    fn magnetic(&self, _t: f64) -> f64 {
        0.0
    }
    fn magnetic_rate(&self, _t: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrive;

impl Drive for ZeroDrive {
    fn electric(&self, _t: f64) -> f64 {
        0.0
    }
    fn electric_rate(&self, _t: f64) -> f64 {
        0.0
    }
}

/// `amplitude * sin(2π f t + phase)` on the electric field.
#[derive(Debug, Clone, Copy)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub fn new(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

impl Drive for Sinusoid {
    fn electric(&self, t: f64) -> f64 {
        self.amplitude * (TAU * self.frequency * t + self.phase).sin()
    }
    fn electric_rate(&self, t: f64) -> f64 {
        self.amplitude * TAU * self.frequency * (TAU * self.frequency * t + self.phase).cos()
    }
}

/// Electric drive given by closures for the value and its rate.
pub struct FnDrive<V, R> {
    pub value: V,
    pub rate: R,
}

impl<V: Fn(f64) -> f64, R: Fn(f64) -> f64> Drive for FnDrive<V, R> {
    fn electric(&self, t: f64) -> f64 {
        (self.value)(t)
    }
    fn electric_rate(&self, t: f64) -> f64 {
        (self.rate)(t)
    }
}

/// Piecewise-linear electric drive through `(times[i], values[i])`,
/// held constant outside the sampled range.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    /// `times` must be strictly increasing and the same length as `values`.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Option<Self> {
        if times.len() != values.len() || times.is_empty() {
            return None;
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        Some(Self { times, values })
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.times[0] || t >= *self.times.last().unwrap() {
            return None;
        }
        Some(self.times.partition_point(|&x| x <= t) - 1)
    }
}

impl Drive for PiecewiseLinear {
    fn electric(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(i) => {
                let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                self.values[i] + w * (self.values[i + 1] - self.values[i])
            }
            None if t < self.times[0] => self.values[0],
            None => *self.values.last().unwrap(),
        }
    }
    fn electric_rate(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(i) => (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i]),
            None => 0.0,
        }
    }
}
