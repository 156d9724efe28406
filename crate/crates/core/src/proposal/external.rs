use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::context::ReferenceSet;
use super::genome::Genome;
use crate::archive::Archive;
use crate::env::MetricVector;
use crate::error::{Error, Result};
use crate::search::{Constraint, Reflection};

/// Environment variable naming the proposer endpoint: an `http://` URL or
/// a command line for a subprocess speaking line-delimited JSON.
pub const PROPOSER_ENV: &str = "POISE_PROPOSER";
/// Request/response exchanges before giving up.
pub const MAX_ROUND_TRIPS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub tier: String,
    pub node_id: String,
    pub genome: Genome,
    pub metrics: MetricVector,
    pub reflection: Reflection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRequest {
    pub parent_id: String,
    pub parent: Genome,
    pub parent_metrics: MetricVector,
    pub parent_reflection: Reflection,
    pub references: Vec<ReferenceDoc>,
    pub constraint: Constraint,
    /// Number of genomes wanted.
    pub n: usize,
    /// Opaque literature priors, passed through untouched.
    #[serde(default)]
    pub priors: serde_json::Value,
    /// Rejection reasons from the previous round trip.
    #[serde(default)]
    pub feedback: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProposalResponse {
    #[serde(default)]
    pub genomes: Vec<serde_json::Value>,
}

pub fn build_request(
    archive: &Archive,
    parent_id: &str,
    refs: &ReferenceSet,
    constraint: Constraint,
    n: usize,
) -> Result<ProposalRequest> {
    let parent = archive.get(parent_id)?;
    let tiers = [
        ("pareto", &refs.pareto_refs),
        ("complementary", &refs.complementary_refs),
        ("exploratory", &refs.exploratory_refs),
    ];
    let mut references = Vec::new();
    for (tier, ids) in tiers {
        for id in ids {
            let e = archive.get(id)?;
            references.push(ReferenceDoc {
                tier: tier.into(),
                node_id: id.clone(),
                genome: e.genome.clone(),
                metrics: e.metrics.clone(),
                reflection: e.reflection.clone(),
            });
        }
    }
    Ok(ProposalRequest {
        parent_id: parent_id.to_string(),
        parent: parent.genome.clone(),
        parent_metrics: parent.metrics.clone(),
        parent_reflection: parent.reflection.clone(),
        references,
        constraint,
        n,
        priors: serde_json::Value::Null,
        feedback: Vec::new(),
    })
}

/// Parses and validates proposed genomes. Returns the accepted genomes and
/// one reason per rejected entry.
pub fn validate_proposals(values: &[serde_json::Value]) -> (Vec<Genome>, Vec<String>) {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match serde_json::from_value::<Genome>(v.clone()) {
            Err(e) => rejected.push(format!("genome {i}: schema: {e}")),
            Ok(g) => {
                let g = g.normalized();
                match g.validate() {
                    Ok(()) => ok.push(g),
                    Err(e) => rejected.push(format!("genome {i}: {e}")),
                }
            }
        }
    }
    (ok, rejected)
}

/// A way to deliver one request document and receive one response line.
pub trait Transport {
    fn exchange(&self, request: &str) -> Result<String>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProposerEndpoint {
    Http(String),
    Command(Vec<String>),
}

impl ProposerEndpoint {
    pub fn parse(spec: &str) -> Option<Self> {
        let spec = spec.trim();
        if spec.is_empty() {
            return None;
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Some(ProposerEndpoint::Http(spec.to_string()));
        }
        Some(ProposerEndpoint::Command(spec.split_whitespace().map(String::from).collect()))
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(PROPOSER_ENV).ok().and_then(|s| Self::parse(&s))
    }
}

impl Transport for ProposerEndpoint {
    fn exchange(&self, request: &str) -> Result<String> {
        match self {
            ProposerEndpoint::Http(url) => {
                let mut resp = ureq::post(url)
                    .header("content-type", "application/json")
                    .send(request)
                    .map_err(|e| Error::Proposer(format!("POST {url}: {e}")))?;
                resp.body_mut()
                    .read_to_string()
                    .map_err(|e| Error::Proposer(format!("reading response from {url}: {e}")))
            }
            ProposerEndpoint::Command(argv) => {
                let (prog, args) = argv.split_first().ok_or_else(|| Error::Proposer("empty command".into()))?;
                let mut child = Command::new(prog)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()
                    .map_err(|e| Error::Proposer(format!("spawning `{prog}`: {e}")))?;
                {
                    let mut stdin = child.stdin.take().expect("piped stdin");
                    stdin
                        .write_all(request.as_bytes())
                        .and_then(|_| stdin.write_all(b"\n"))
                        .map_err(|e| Error::Proposer(format!("writing to `{prog}`: {e}")))?;
                }
                let mut line = String::new();
                BufReader::new(child.stdout.take().expect("piped stdout"))
                    .read_line(&mut line)
                    .map_err(|e| Error::Proposer(format!("reading from `{prog}`: {e}")))?;
                let _ = child.wait();
                Ok(line)
            }
        }
    }
}

/// Sends `request` and returns the valid genomes of the first response
/// that has any. Rejection reasons are fed back on the next round trip.
/// Fails after [`MAX_ROUND_TRIPS`] unproductive exchanges or on transport
/// errors, signalling the caller to fall back to internal generation.
pub fn external_proposer_exchange(transport: &dyn Transport, request: &ProposalRequest) -> Result<Vec<Genome>> {
    let mut request = request.clone();
    let mut last = String::from("no response");
    for _ in 0..MAX_ROUND_TRIPS {
        let line = transport.exchange(&serde_json::to_string(&request)?)?;
        let response: ProposalResponse = if line.trim().is_empty() {
            ProposalResponse::default()
        } else {
            serde_json::from_str(line.trim()).map_err(|e| Error::Proposer(format!("malformed response: {e}")))?
        };
        let (ok, rejected) = validate_proposals(&response.genomes);
        if !ok.is_empty() {
            return Ok(ok);
        }
        last = if response.genomes.is_empty() {
            "empty response".into()
        } else {
            rejected.join("; ")
        };
        request.feedback = if rejected.is_empty() { vec![last.clone()] } else { rejected };
    }
    Err(Error::Proposer(format!("no valid genomes after {MAX_ROUND_TRIPS} round trips: {last}")))
}

#[cfg(test)]
mod tests {
    use std::cell::RefCell;

    use super::*;
    use crate::estimators::Algorithm;

    struct Canned {
        replies: RefCell<Vec<String>>,
        seen: RefCell<Vec<String>>,
    }

    impl Canned {
        fn new(replies: &[String]) -> Self {
            Canned {
                replies: RefCell::new(replies.iter().rev().cloned().collect()),
                seen: RefCell::new(Vec::new()),
            }
        }
    }

    impl Transport for Canned {
        fn exchange(&self, request: &str) -> Result<String> {
            self.seen.borrow_mut().push(request.to_string());
            Ok(self.replies.borrow_mut().pop().unwrap_or_default())
        }
    }

    fn request() -> ProposalRequest {
        let archive = crate::testing::random_archive(1, 3);
        build_request(&archive, "n0001", &ReferenceSet::default(), Constraint::None, 3).unwrap()
    }

    fn reply(genomes: &[serde_json::Value]) -> String {
        serde_json::to_string(&ProposalResponse {
            genomes: genomes.to_vec(),
        })
        .unwrap()
    }

    #[test]
    fn out_of_range_field_is_named() {
        let mut g = serde_json::to_value(Genome::baseline(Algorithm::Av)).unwrap();
        g["estimator"]["sigma_min"] = 5.0.into();
        let (ok, rejected) = validate_proposals(&[g]);
        assert!(ok.is_empty());
        assert!(rejected[0].contains("sigma_min"), "{}", rejected[0]);
    }

    #[test]
    fn valid_genomes_pass_through() {
        let gs: Vec<Genome> = [Algorithm::Av, Algorithm::Fa, Algorithm::Sa].map(Genome::baseline).into();
        let values: Vec<_> = gs.iter().map(|g| serde_json::to_value(g).unwrap()).collect();
        let t = Canned::new(&[reply(&values)]);
        assert_eq!(external_proposer_exchange(&t, &request()).unwrap(), gs);
    }

    #[test]
    fn empty_responses_fall_back_after_two_trips() {
        let t = Canned::new(&[reply(&[]), String::new(), reply(&[])]);
        assert!(matches!(external_proposer_exchange(&t, &request()), Err(Error::Proposer(_))));
        assert_eq!(t.seen.borrow().len(), MAX_ROUND_TRIPS);
    }

    #[test]
    fn rejections_are_fed_back() {
        let mut bad = serde_json::to_value(Genome::baseline(Algorithm::Av)).unwrap();
        bad["estimator"]["clip_lo"] = 2.0.into();
        let good = serde_json::to_value(Genome::baseline(Algorithm::Dfr)).unwrap();
        let t = Canned::new(&[reply(&[bad]), reply(&[good])]);
        let out = external_proposer_exchange(&t, &request()).unwrap();
        assert_eq!(out[0].algorithm(), Algorithm::Dfr);
        let second: ProposalRequest = serde_json::from_str(&t.seen.borrow()[1]).unwrap();
        assert_eq!(second.feedback.len(), 1);
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            ProposerEndpoint::parse("http://127.0.0.1:9/x"),
            Some(ProposerEndpoint::Http("http://127.0.0.1:9/x".into()))
        );
        assert_eq!(
            ProposerEndpoint::parse("python3 prop.py"),
            Some(ProposerEndpoint::Command(vec!["python3".into(), "prop.py".into()]))
        );
        assert_eq!(ProposerEndpoint::parse("  "), None);
    }
}
