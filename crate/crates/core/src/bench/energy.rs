use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default time between consecutive segments, in seconds.
pub const SEGMENT_PERIOD_S: f64 = 3.0;

fn default_period() -> f64 {
    SEGMENT_PERIOD_S
}

/// Currents and timing of one device running one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformProfile {
    pub name: String,
    pub active_current_ma: f64,
    pub idle_current_ma: f64,
    pub battery_capacity_mah: f64,
    #[serde(default = "default_period")]
    pub period_s: f64,
    pub inference_time_s: f64,
    /// Currents obtained by inverting a published battery life rather than
    /// measured directly.
    #[serde(default)]
    pub derived: bool,
}

const BUNDLED: [(&str, &str); 4] = [
    ("raspberry-pi-zero", include_str!("../../profiles/raspberry-pi-zero.toml")),
    ("raspberry-pi-zero-teacher", include_str!("../../profiles/raspberry-pi-zero-teacher.toml")),
    ("kendryte-k210", include_str!("../../profiles/kendryte-k210.toml")),
    ("pulp", include_str!("../../profiles/pulp.toml")),
];

impl PlatformProfile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no bundled profile named {name:?}")))?;
        Self::from_toml(text)
    }

    /// Checks currents, capacity and period. Inference time beyond the
    /// period is allowed here and reported by [`battery_life`].
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.active_current_ma,
            self.idle_current_ma,
            self.battery_capacity_mah,
            self.period_s,
            self.inference_time_s,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("platform profile"));
        }
        if self.active_current_ma < 0.0 || self.idle_current_ma < 0.0 {
            return Err(Error::InvalidConfig("currents must be non-negative".into()));
        }
        if self.battery_capacity_mah <= 0.0 || self.period_s <= 0.0 || self.inference_time_s < 0.0 {
            return Err(Error::InvalidConfig(
                "capacity and period must be positive, inference time non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_real_time(&self) -> bool {
        self.inference_time_s <= self.period_s
    }

    /// Flat profile whose average current reproduces `battery_life_h`.
    pub fn from_battery_life(name: &str, capacity_mah: f64, battery_life_h: f64, inference_time_s: f64) -> Result<Self> {
        if !(battery_life_h > 0.0) {
            return Err(Error::InvalidConfig("battery life must be positive".into()));
        }
        let current = capacity_mah / battery_life_h;
        let p = Self {
            name: name.into(),
            active_current_ma: current,
            idle_current_ma: current,
            battery_capacity_mah: capacity_mah,
            period_s: SEGMENT_PERIOD_S,
            inference_time_s,
            derived: true,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub profile: String,
    pub duty_cycle: f64,
    pub average_current_ma: f64,
    pub battery_capacity_mah: f64,
    pub battery_life_h: f64,
}

/// Duty-cycled average current and the resulting battery life.
pub fn battery_life(profile: &PlatformProfile) -> Result<EnergyReport> {
    profile.validate()?;
    if !profile.is_real_time() {
        return Err(Error::RealTimeViolation {
            inference_s: profile.inference_time_s,
            period_s: profile.period_s,
        });
    }
    let duty = profile.inference_time_s / profile.period_s;
    let avg = profile.active_current_ma * duty + profile.idle_current_ma * (1.0 - duty);
    if avg <= 0.0 {
        return Err(Error::InvalidConfig("average current is zero".into()));
    }
    Ok(EnergyReport {
        profile: profile.name.clone(),
        duty_cycle: duty,
        average_current_ma: avg,
        battery_capacity_mah: profile.battery_capacity_mah,
        battery_life_h: profile.battery_capacity_mah / avg,
    })
}

/// Energy saved by `a` relative to `b`: `1 - avg_a / avg_b`.
pub fn compare_energy(a: &EnergyReport, b: &EnergyReport) -> Result<f64> {
    if a.battery_capacity_mah != b.battery_capacity_mah {
        return Err(Error::CapacityMismatch(a.battery_capacity_mah, b.battery_capacity_mah));
    }
    Ok(1.0 - a.average_current_ma / b.average_current_ma)
}
