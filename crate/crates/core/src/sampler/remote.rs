use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Sampler, SamplerConfig, SamplerError};
use crate::qubo::{Assignment, QuboDocument, QuboModel, SampleSet};

pub const REMOTE_URL_ENV: &str = "HYQ_REMOTE_SAMPLER_URL";

/// HTTP client for an external sampling service.
///
/// Request body: `{"qubo": <qubo document>, "config": <sampler config>}`.
/// Response body: `{"samples": [{"bits": [...], "energy": e, "multiplicity": k}]}`.
#[derive(Clone, Debug)]
pub struct RemoteSampler {
    pub url: String,
    pub timeout: Duration,
}

impl RemoteSampler {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteSampler {
            url: url.into(),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn from_env() -> Result<Self, SamplerError> {
        match std::env::var(REMOTE_URL_ENV) {
            Ok(url) if !url.trim().is_empty() => Ok(Self::new(url.trim())),
            _ => Err(SamplerError::Remote(format!("{REMOTE_URL_ENV} is not set"))),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    qubo: QuboDocument,
    config: &'a SamplerConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    samples: Vec<RemoteSample>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RemoteSample {
    bits: Assignment,
    energy: f64,
    #[serde(default = "one")]
    multiplicity: usize,
}

fn one() -> usize {
    1
}

impl Sampler for RemoteSampler {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn sample(
        &self,
        model: &QuboModel,
        cfg: &SamplerConfig,
        _initial: Option<&Assignment>,
    ) -> Result<SampleSet, SamplerError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        let request = Request {
            qubo: QuboDocument::from(model),
            config: cfg,
        };
        let mut response = agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| SamplerError::Remote(format!("POST {}: {e}", self.url)))?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| SamplerError::Remote(format!("reading response: {e}")))?;
        parse_remote_response(model, &text)
    }
}

/// Validates a service response against `model`. Reported energies must
/// agree with local re-evaluation to `1e-6` relative.
pub fn parse_remote_response(model: &QuboModel, text: &str) -> Result<SampleSet, SamplerError> {
    let response: Response = serde_json::from_str(text)
        .map_err(|e| SamplerError::Remote(format!("malformed response: {e}")))?;
    if response.samples.is_empty() {
        return Err(SamplerError::Remote("response contains no samples".into()));
    }
    let mut counted = Vec::with_capacity(response.samples.len());
    for (k, s) in response.samples.into_iter().enumerate() {
        if s.bits.len() != model.num_vars() {
            return Err(SamplerError::Remote(format!(
                "sample {k} has {} bits, model has {}",
                s.bits.len(),
                model.num_vars()
            )));
        }
        if s.multiplicity == 0 {
            return Err(SamplerError::Remote(format!("sample {k} has multiplicity 0")));
        }
        let local = model.energy_unchecked(s.bits.bits());
        if !s.energy.is_finite() || (local - s.energy).abs() > 1e-6 * (1.0 + local.abs()) {
            return Err(SamplerError::Remote(format!(
                "sample {k} reports energy {} but evaluates to {local}",
                s.energy
            )));
        }
        counted.push((s.bits, s.multiplicity));
    }
    Ok(SampleSet::from_counted(model, counted)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    fn model() -> QuboModel {
        let mut m = QuboModel::new(2);
        m.add_linear(0, -1.0);
        m.add_quadratic(0, 1, 2.0);
        m
    }

    /// Serves exactly one request with the given status and body.
    fn serve_once(status: &'static str, body: String) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/sample", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut request = vec![0u8; length];
            reader.read_exact(&mut request).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8(request).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn round_trip_against_local_server() {
        let body = r#"{"samples":[{"bits":[1,0],"energy":-1.0,"multiplicity":7},{"bits":[0,0],"energy":0.0,"multiplicity":3}]}"#;
        let (url, handle) = serve_once("200 OK", body.to_string());
        let set = RemoteSampler::new(url)
            .sample(&model(), &SamplerConfig::default(), None)
            .unwrap();
        let request: serde_json::Value = serde_json::from_str(&handle.join().unwrap()).unwrap();
        assert_eq!(request["qubo"]["num_vars"], 2);
        assert_eq!(request["config"]["num_reads"], 1000);
        assert_eq!(set.first().unwrap().energy, -1.0);
        assert_eq!(set.first().unwrap().multiplicity, 7);
    }

    #[test]
    fn non_200_is_backend_error() {
        let (url, handle) = serve_once("503 Service Unavailable", "{}".into());
        let err = RemoteSampler::new(url)
            .sample(&model(), &SamplerConfig::default(), None)
            .unwrap_err();
        handle.join().unwrap();
        assert!(matches!(err, SamplerError::Remote(_)));
    }

    #[test]
    fn unreachable_host_is_backend_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let mut s = RemoteSampler::new(url);
        s.timeout = Duration::from_secs(2);
        assert!(matches!(
            s.sample(&model(), &SamplerConfig::default(), None),
            Err(SamplerError::Remote(_))
        ));
    }

    #[test]
    fn energy_mismatch_is_rejected() {
        let text = r#"{"samples":[{"bits":[1,1],"energy":-5.0,"multiplicity":1}]}"#;
        assert!(parse_remote_response(&model(), text).is_err());
    }

    #[test]
    fn wrong_length_and_empty_are_rejected() {
        assert!(parse_remote_response(&model(), r#"{"samples":[{"bits":[1],"energy":-1.0}]}"#).is_err());
        assert!(parse_remote_response(&model(), r#"{"samples":[]}"#).is_err());
        assert!(parse_remote_response(&model(), "not json").is_err());
    }
}
