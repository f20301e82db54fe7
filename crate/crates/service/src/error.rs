use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use minpath_core::error::{IoError, MetricError, RegionError, TraceError};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("session is busy")]
    Locked,
    #[error("computation exceeded {0:?}")]
    Timeout(Duration),
    #[error("{0}")]
    TooLarge(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] minpath_core::Error),
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                Self::Core(e.into())
            }
        }
    )*};
}

core_from!(
    minpath_core::error::GridError,
    MetricError,
    minpath_core::error::EikonalError,
    TraceError,
    RegionError,
    IoError
);

impl ApiError {
    #[must_use]
    pub fn status(&self) -> StatusCode {
        use minpath_core::Error as E;
        match self {
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::Locked => StatusCode::LOCKED,
            Self::Timeout(_) => StatusCode::SERVICE_UNAVAILABLE,
            Self::TooLarge(_) => StatusCode::PAYLOAD_TOO_LARGE,
            Self::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            Self::Core(e) => match e {
                E::Io(IoError::UnsupportedFormat(_)) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
                E::Io(IoError::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
                E::Io(_) | E::Grid(_) | E::Eikonal(_) => StatusCode::BAD_REQUEST,
                E::Metric(MetricError::NotPositiveDefinite { .. })
                | E::Region(RegionError::SegmentTraceFailed { .. } | RegionError::SolverDiverged { .. } | RegionError::DegenerateRegion)
                | E::Trace(_) => StatusCode::UNPROCESSABLE_ENTITY,
                E::Metric(_) | E::Region(_) => StatusCode::BAD_REQUEST,
            },
        }
    }

    fn body(&self) -> Value {
        let mut body = json!({ "error": self.to_string() });
        match self {
            Self::Core(minpath_core::Error::Metric(MetricError::NotPositiveDefinite { node, value })) => {
                body["node"] = json!(node);
                body["value"] = json!(value);
            }
            Self::Core(minpath_core::Error::Region(RegionError::SegmentTraceFailed { segment, .. })) => {
                body["segment"] = json!(segment);
            }
            _ => {}
        }
        body
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_statuses() {
        let npd = ApiError::from(MetricError::NotPositiveDefinite { node: 17, value: 1.2 });
        assert_eq!(npd.status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(npd.body()["node"], 17);

        let seg = ApiError::from(RegionError::SegmentTraceFailed {
            segment: 2,
            reason: "stalled".into(),
        });
        assert_eq!(seg.status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(seg.body()["segment"], 2);

        let fmt = ApiError::from(IoError::UnsupportedFormat("gif".into()));
        assert_eq!(fmt.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);
        assert_eq!(ApiError::Locked.status(), StatusCode::LOCKED);
        assert_eq!(ApiError::Conflict("x".into()).status(), StatusCode::CONFLICT);
    }
}
