//! Passwords and bearer sessions.

use std::collections::{BTreeMap, HashMap};
use std::num::NonZeroU32;
use std::sync::Mutex;

use consent_core::AccountId;
use ring::rand::{SecureRandom, SystemRandom};
use ring::{digest, pbkdf2};
use serde::{Deserialize, Serialize};

const ITERATIONS: u32 = 60_000;
const MIN_PASSWORD_LEN: usize = 8;
static ALGORITHM: pbkdf2::Algorithm = pbkdf2::PBKDF2_HMAC_SHA256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    salt: String,
    hash: String,
    iterations: u32,
}

impl Credential {
    pub fn new(password: &str, rng: &SystemRandom) -> Self {
        let mut salt = [0u8; 16];
        rng.fill(&mut salt).expect("system randomness");
        let mut hash = [0u8; digest::SHA256_OUTPUT_LEN];
        let iterations = NonZeroU32::new(ITERATIONS).expect("non-zero");
        pbkdf2::derive(ALGORITHM, iterations, &salt, password.as_bytes(), &mut hash);
        Credential {
            salt: hex::encode(salt),
            hash: hex::encode(hash),
            iterations: ITERATIONS,
        }
    }

    pub fn verify(&self, password: &str) -> bool {
        let (Ok(salt), Ok(hash), Some(iterations)) = (
            hex::decode(&self.salt),
            hex::decode(&self.hash),
            NonZeroU32::new(self.iterations),
        ) else {
            return false;
        };
        pbkdf2::verify(ALGORITHM, iterations, &salt, password.as_bytes(), &hash).is_ok()
    }
}

pub fn password_acceptable(password: &str) -> bool {
    password.chars().count() >= MIN_PASSWORD_LEN
}

/// Password hashes by account.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Credentials(BTreeMap<AccountId, Credential>);

impl Credentials {
    pub fn set(&mut self, account: AccountId, credential: Credential) {
        self.0.insert(account, credential);
    }

    pub fn verify(&self, account: AccountId, password: &str) -> bool {
        self.0.get(&account).is_some_and(|c| c.verify(password))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionError {
    Unknown,
    CapReached,
}

#[derive(Debug)]
struct Session {
    account: AccountId,
    used: u64,
}

/// Opaque bearer tokens with a fixed request budget each. Memory-only;
/// a restart logs everyone out.
#[derive(Debug)]
pub struct Sessions {
    cap: u64,
    rng: SystemRandom,
    live: Mutex<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(cap: u64) -> Self {
        Sessions {
            cap,
            rng: SystemRandom::new(),
            live: Mutex::new(HashMap::new()),
        }
    }

    pub fn open(&self, account: AccountId) -> String {
        let mut raw = [0u8; 32];
        self.rng.fill(&mut raw).expect("system randomness");
        let token = hex::encode(raw);
        self.live
            .lock()
            .expect("session table")
            .insert(token.clone(), Session { account, used: 0 });
        token
    }

    /// Charges one request to `token` and returns its account.
    pub fn charge(&self, token: &str) -> Result<AccountId, SessionError> {
        let mut live = self.live.lock().expect("session table");
        let session = live.get_mut(token).ok_or(SessionError::Unknown)?;
        if session.used >= self.cap {
            return Err(SessionError::CapReached);
        }
        session.used += 1;
        Ok(session.account)
    }

    pub fn close(&self, token: &str) {
        self.live.lock().expect("session table").remove(token);
    }

    pub fn rng(&self) -> &SystemRandom {
        &self.rng
    }
}
