use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level k must be positive, got {0}")]
    InvalidLevel(u32),
    #[error("label 2j = {twice_j} is outside the level-{k} range 0..={k}")]
    LabelOutOfRange { twice_j: u32, k: u32 },
    #[error("level k = {k} exceeds the configured maximum {max}")]
    LevelTooLarge { k: u32, max: u32 },
}
