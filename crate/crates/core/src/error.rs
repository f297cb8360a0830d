use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("ostensible rate times dt must be < 1, got {0}")]
    OstensibleTooLarge(f64),
    #[error("ostensible rate is zero; substitute a floor value")]
    ZeroOstensibleRate,
    #[error("positivity violated at t = {time}: |r|^2 - n^2 = {excess}")]
    PositivityViolation { time: f64, excess: f64 },
    #[error("record impossible under all candidates")]
    ImpossibleRecord,
    #[error("invalid record: {0}")]
    InvalidRecord(&'static str),
    #[error("odd node count {0} breaks the +/- symmetry of the grid")]
    OddNodeCount(usize),
    #[error("dark counts are not supported by the avalanche waiting-time model")]
    DarkCountsUnsupported,
}
