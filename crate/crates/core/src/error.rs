use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no such source configuration: f = {frequency} MHz, s = {distance} mm")]
    NoSuchSource { frequency: f64, distance: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("all variogram bins are empty")]
    EmptyVariogram,

    #[error("variogram fit failed: {0}")]
    Fit(String),

    #[error("directional fit failed along axis {axis}: {source}")]
    DirectionalFit {
        axis: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular kriging matrix; nearest sample pair {first} / {second} at distance {distance:e}")]
    SingularMatrix {
        first: String,
        second: String,
        distance: f64,
    },

    #[error("zero prediction error at test point {id}; zero residuals are not allowed")]
    ZeroResidualDenominator { id: String },

    #[error("zero variance")]
    ZeroVariance,

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
