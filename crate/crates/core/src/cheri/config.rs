use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("addr_w must be in 8..=16, got {0}")]
    AddrWidth(u32),
    #[error("data_w must be 32, got {0}")]
    DataWidth(u32),
    #[error("num_regs must be in 2..=8, got {0}")]
    NumRegs(u8),
}

/// Parameters and seeded defects of the reference core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub addr_w: u32,
    pub data_w: u32,
    pub num_regs: u8,
    /// Documented polarity of the protection-enable pin.
    pub cheri_enable_active_low: bool,
    /// The pin acts with the opposite polarity to the documented one.
    pub bug_enable_pin_polarity: bool,
    /// Two-beat capability accesses check only the first 4 bytes.
    pub bug_capstore_second_beat: bool,
    /// Fetch is requested before the PCC check resolves, and the faulting
    /// word can delay the trap by one cycle.
    pub bug_fetch_before_pcc_check: bool,
    /// With the early fetch still in place, discard the data returned for
    /// a faulting fetch so it never reaches the execute stage.
    pub fetch_fault_squash: bool,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            addr_w: 16,
            data_w: 32,
            num_regs: 8,
            cheri_enable_active_low: false,
            bug_enable_pin_polarity: false,
            bug_capstore_second_beat: false,
            bug_fetch_before_pcc_check: false,
            fetch_fault_squash: false,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(8..=16).contains(&self.addr_w) {
            return Err(ConfigError::AddrWidth(self.addr_w));
        }
        if self.data_w != 32 {
            return Err(ConfigError::DataWidth(self.data_w));
        }
        if !(2..=8).contains(&self.num_regs) {
            return Err(ConfigError::NumRegs(self.num_regs));
        }
        Ok(())
    }

    /// Names and current values of the seeded defect toggles.
    pub fn bugs(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("bug_enable_pin_polarity", self.bug_enable_pin_polarity),
            ("bug_capstore_second_beat", self.bug_capstore_second_beat),
            (
                "bug_fetch_before_pcc_check",
                self.bug_fetch_before_pcc_check,
            ),
        ]
    }

    pub fn with_bug(&self, name: &str, on: bool) -> CoreConfig {
        let mut c = self.clone();
        match name {
            "bug_enable_pin_polarity" => c.bug_enable_pin_polarity = on,
            "bug_capstore_second_beat" => c.bug_capstore_second_beat = on,
            "bug_fetch_before_pcc_check" => c.bug_fetch_before_pcc_check = on,
            "fetch_fault_squash" => c.fetch_fault_squash = on,
            _ => panic!("unknown toggle `{name}`"),
        }
        c
    }

    /// Pin level that enables protection according to the documentation.
    pub fn documented_enable_level(&self) -> bool {
        !self.cheri_enable_active_low
    }

    pub fn addr_mask(&self) -> u64 {
        (1u64 << self.addr_w) - 1
    }
}
