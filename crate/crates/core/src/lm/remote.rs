//! Client for the distribution bridge.
//!
//! The bridge speaks newline-delimited JSON over a stream. Each request is one
//! line and gets exactly one response line:
//!
//! ```text
//! {"op":"hello","version":1}                      -> {"vocab_size":m,"vocab_hash":"..."}
//! {"op":"open","source":"..."}                    -> {"session":"...","pivot":"..."}
//! {"op":"dist","session":"...","prefix":[..],"mode":"dense"}
//!                                                 -> {"probs":[...]}
//! {"op":"dist","session":"...","prefix":[..],"mode":"sparse","k":50}
//!                                                 -> {"top":[[id,p],...],"rest_mass":r}
//! {"op":"close","session":"..."}                  -> {"ok":true}
//! ```
//!
//! Any response may instead be `{"error":"<code>","message":"..."}`. Unknown
//! response fields are ignored. A session is opened lazily for each distinct
//! source text and closed when the source changes or the client is dropped.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Distribution, GenerationContext, LmError, Provider};
use crate::tokenizer::TokenId;

pub const PROTOCOL_VERSION: u32 = 1;
/// Providers answer with probabilities summing to one within this tolerance.
pub const REMOTE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RequestMode {
    Dense,
    /// Top-k entries plus the remaining mass.
    Sparse(usize),
}

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Request<'a> {
    Hello {
        version: u32,
    },
    Open {
        source: &'a str,
    },
    Dist {
        session: &'a str,
        prefix: &'a [TokenId],
        mode: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    Close {
        session: &'a str,
    },
}

#[derive(Deserialize)]
struct ErrorReply {
    error: String,
    #[serde(default)]
    message: String,
}

#[derive(Deserialize)]
struct HelloReply {
    vocab_size: usize,
    vocab_hash: String,
    #[serde(default)]
    version: Option<u32>,
}

#[derive(Deserialize)]
struct OpenReply {
    session: String,
    #[serde(default)]
    pivot: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistReply {
    Dense {
        probs: Vec<f64>,
    },
    Sparse {
        top: Vec<(TokenId, f64)>,
        rest_mass: f64,
    },
}

struct Session {
    id: String,
    source: String,
    pivot: String,
}

pub struct RemoteProvider {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    vocab_size: usize,
    vocab_hash: String,
    mode: RequestMode,
    session: Option<Session>,
}

fn unavailable(e: impl std::fmt::Display) -> LmError {
    LmError::ProviderUnavailable(e.to_string())
}

impl RemoteProvider {
    /// Connects over TCP and performs the handshake.
    pub fn connect(addr: &str) -> Result<Self, LmError> {
        let target = addr
            .to_socket_addrs()
            .map_err(unavailable)?
            .next()
            .ok_or_else(|| unavailable(format!("{addr} resolves to no address")))?;
        let stream =
            TcpStream::connect_timeout(&target, Duration::from_secs(5)).map_err(unavailable)?;
        stream
            .set_read_timeout(Some(Duration::from_secs(60)))
            .map_err(unavailable)?;
        let reader = BufReader::new(stream.try_clone().map_err(unavailable)?);
        Self::over(Box::new(reader), Box::new(stream))
    }

    /// Handshakes over an arbitrary line transport (stdio pipes, in-memory buffers).
    pub fn over(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
    ) -> Result<Self, LmError> {
        let mut client = Self {
            reader,
            writer,
            vocab_size: 0,
            vocab_hash: String::new(),
            mode: RequestMode::Dense,
            session: None,
        };
        let reply: HelloReply = client.call(&Request::Hello {
            version: PROTOCOL_VERSION,
        })?;
        if let Some(v) = reply.version.filter(|&v| v != PROTOCOL_VERSION) {
            return Err(LmError::Protocol(format!(
                "server speaks protocol version {v}"
            )));
        }
        if reply.vocab_size == 0 {
            return Err(LmError::Protocol(
                "server reports an empty vocabulary".into(),
            ));
        }
        client.vocab_size = reply.vocab_size;
        client.vocab_hash = reply.vocab_hash;
        Ok(client)
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    /// Refuses a server whose vocabulary differs from the tokenizer's.
    pub fn verify_vocab(&self, expected_hash: &str) -> Result<(), LmError> {
        if self.vocab_hash == expected_hash {
            Ok(())
        } else {
            Err(LmError::VocabMismatch {
                expected: expected_hash.to_owned(),
                got: self.vocab_hash.clone(),
            })
        }
    }

    pub fn set_mode(&mut self, mode: RequestMode) {
        self.mode = mode;
    }

    /// Pivot text of the current session, if one is open.
    pub fn pivot(&self) -> Option<&str> {
        self.session.as_ref().map(|s| s.pivot.as_str())
    }

    fn call<T: for<'de> Deserialize<'de>>(&mut self, request: &Request<'_>) -> Result<T, LmError> {
        let mut line =
            serde_json::to_string(request).map_err(|e| LmError::Protocol(e.to_string()))?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .map_err(unavailable)?;
        self.writer.flush().map_err(unavailable)?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply).map_err(unavailable)? == 0 {
            return Err(unavailable("bridge closed the connection"));
        }
        let value: serde_json::Value = serde_json::from_str(&reply)
            .map_err(|e| LmError::Protocol(format!("bad response: {e}")))?;
        if value.get("error").is_some() {
            let err: ErrorReply =
                serde_json::from_value(value).map_err(|e| LmError::Protocol(e.to_string()))?;
            return Err(LmError::Protocol(format!("{}: {}", err.error, err.message)));
        }
        serde_json::from_value(value)
            .map_err(|e| LmError::Protocol(format!("unexpected response: {e}")))
    }

    fn close_session(&mut self) -> Result<(), LmError> {
        if let Some(session) = self.session.take() {
            let _: serde_json::Value = self.call(&Request::Close {
                session: &session.id,
            })?;
        }
        Ok(())
    }

    fn session_for(&mut self, source: &str) -> Result<String, LmError> {
        if let Some(s) = &self.session {
            if s.source == source {
                return Ok(s.id.clone());
            }
        }
        self.close_session()?;
        let reply: OpenReply = self.call(&Request::Open { source })?;
        self.session = Some(Session {
            id: reply.session.clone(),
            source: source.to_owned(),
            pivot: reply.pivot,
        });
        Ok(reply.session)
    }

    fn request(
        &mut self,
        ctx: &GenerationContext<'_>,
        mode: RequestMode,
    ) -> Result<Distribution, LmError> {
        let session = self.session_for(ctx.source)?;
        let (mode_name, k) = match mode {
            RequestMode::Dense => ("dense", None),
            RequestMode::Sparse(k) => ("sparse", Some(k)),
        };
        let reply: DistReply = self.call(&Request::Dist {
            session: &session,
            prefix: ctx.prefix,
            mode: mode_name,
            k,
        })?;
        let dist = match reply {
            DistReply::Dense { probs } => {
                if probs.len() != self.vocab_size {
                    return Err(LmError::Protocol(format!(
                        "dense response has {} entries, vocabulary has {}",
                        probs.len(),
                        self.vocab_size
                    )));
                }
                Distribution::with_tolerance(probs, REMOTE_TOLERANCE)?
            }
            DistReply::Sparse { top, rest_mass } => {
                Distribution::from_sparse(self.vocab_size, &top, rest_mass, REMOTE_TOLERANCE)?
            }
        };
        Ok(dist.renormalized())
    }
}

impl Provider for RemoteProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        self.request(ctx, self.mode)
    }

    fn dense_distribution(&mut self, ctx: &GenerationContext<'_>) -> Result<Distribution, LmError> {
        self.request(ctx, RequestMode::Dense)
    }
}

impl Drop for RemoteProvider {
    fn drop(&mut self) {
        let _ = self.close_session();
    }
}
