use thiserror::Error;

use crate::bus::BusError;
use crate::control::ControlError;
use crate::halo::HaloError;
use crate::harness::ConfigError;
use crate::localization::LocalizationError;
use crate::plant::PlantError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Halo(#[from] HaloError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
