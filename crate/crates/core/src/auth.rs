//! Accounts, bearer sessions and authorization checks.
//!
//! A login issues an HS256-signed JWT whose `token_id` claim is also
//! registered in a server-side session table with an expiry. A token
//! authenticates only while its signature verifies, its id is still
//! registered, and the injected clock reads before the expiry. Logout
//! removes the id, so revocation does not wait for expiry.

use std::collections::{HashMap, HashSet};

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use chrono::{DateTime, Utc};
use jsonwebtoken::{DecodingKey, EncodingKey, Header, Validation};
use parking_lot::Mutex;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::app::App;
use crate::domain::{DataPointId, ProjectId, Role, User, UserId};
use crate::error::{Error, ErrorCode, Result};
use crate::text::normalize_name;

pub const MIN_PASSWORD_CHARS: usize = 8;

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PasswordParams {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for PasswordParams {
    fn default() -> Self {
        Self {
            memory_kib: Params::DEFAULT_M_COST,
            iterations: Params::DEFAULT_T_COST,
            parallelism: Params::DEFAULT_P_COST,
        }
    }
}

impl PasswordParams {
    /// Cheapest parameters argon2 accepts. For tests and fixtures only.
    pub fn insecure_fast() -> Self {
        Self { memory_kib: 8, iterations: 1, parallelism: 1 }
    }

    fn hasher(&self) -> Result<Argon2<'static>> {
        let params = Params::new(self.memory_kib, self.iterations, self.parallelism, None)
            .map_err(|e| Error::internal(format!("argon2 params: {e}")))?;
        Ok(Argon2::new(Algorithm::Argon2id, Version::V0x13, params))
    }
}

pub fn check_password_strength(password: &str) -> Result<()> {
    if password.chars().count() < MIN_PASSWORD_CHARS {
        return Err(Error::new(
            ErrorCode::WeakPassword,
            format!("password must have at least {MIN_PASSWORD_CHARS} characters"),
        ));
    }
    Ok(())
}

/// Salted Argon2id digest in PHC string format.
pub fn hash_password(password: &str, salt: &[u8; 16], params: PasswordParams) -> Result<String> {
    let salt = SaltString::encode_b64(salt).map_err(|e| Error::internal(e.to_string()))?;
    let hash = params
        .hasher()?
        .hash_password(password.as_bytes(), &salt)
        .map_err(|e| Error::internal(e.to_string()))?;
    Ok(hash.to_string())
}

pub fn verify_password(password: &str, digest: &str) -> bool {
    PasswordHash::new(digest)
        .map(|parsed| Argon2::default().verify_password(password.as_bytes(), &parsed).is_ok())
        .unwrap_or(false)
}

/// Claims carried by a bearer token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub token_id: String,
    pub user_id: UserId,
    pub role: Role,
    /// Expiry, seconds since the Unix epoch.
    pub exp: i64,
}

pub struct TokenCodec {
    encoding: EncodingKey,
    decoding: DecodingKey,
    validation: Validation,
}

impl TokenCodec {
    pub fn new(secret: &[u8]) -> Self {
        let mut validation = Validation::new(jsonwebtoken::Algorithm::HS256);
        // expiry is judged against the injected clock and the session table
        validation.validate_exp = false;
        validation.required_spec_claims = HashSet::new();
        Self {
            encoding: EncodingKey::from_secret(secret),
            decoding: DecodingKey::from_secret(secret),
            validation,
        }
    }

    pub fn encode(&self, claims: &Claims) -> Result<String> {
        jsonwebtoken::encode(&Header::new(jsonwebtoken::Algorithm::HS256), claims, &self.encoding)
            .map_err(|e| Error::internal(format!("token encoding: {e}")))
    }

    pub fn decode(&self, token: &str) -> Result<Claims> {
        jsonwebtoken::decode::<Claims>(token, &self.decoding, &self.validation)
            .map(|data| data.claims)
            .map_err(|_| Error::unauthenticated())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct SessionEntry {
    user_id: UserId,
    expires_at: DateTime<Utc>,
}

/// Live token ids with their expiry.
#[derive(Debug, Default)]
pub struct SessionStore {
    entries: Mutex<HashMap<String, SessionEntry>>,
}

impl SessionStore {
    fn insert(&self, token_id: String, entry: SessionEntry, now: DateTime<Utc>) {
        let mut entries = self.entries.lock();
        entries.retain(|_, e| e.expires_at > now);
        entries.insert(token_id, entry);
    }

    fn lookup(&self, token_id: &str, now: DateTime<Utc>) -> Option<SessionEntry> {
        let mut entries = self.entries.lock();
        match entries.get(token_id) {
            Some(e) if now < e.expires_at => Some(*e),
            Some(_) => {
                entries.remove(token_id);
                None
            }
            None => None,
        }
    }

    fn remove(&self, token_id: &str) -> bool {
        self.entries.lock().remove(token_id).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An authenticated caller. The role is read from the store at verification
/// time, so role changes apply to live sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Principal {
    pub user_id: UserId,
    pub role: Role,
}

impl Principal {
    pub fn is_admin(&self) -> bool {
        self.role == Role::Admin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Admin,
    MemberOf(ProjectId),
    AssigneeOf(DataPointId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginToken {
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

impl App {
    pub(crate) fn new_digest(&self, password: &str) -> Result<String> {
        check_password_strength(password)?;
        let mut salt = [0u8; 16];
        self.rng.lock().fill_bytes(&mut salt);
        hash_password(password, &salt, self.settings.password)
    }

    /// Creates the initial admin account. Re-running with an existing admin
    /// username is a no-op returning that user.
    pub fn bootstrap_admin(&self, username: &str, password: &str) -> Result<User> {
        let username = normalize_name("username", username)?;
        check_password_strength(password)?;
        if let Some(existing) = self.store.read().user_by_name(&username) {
            return match existing.role {
                Role::Admin => Ok(existing.clone()),
                Role::Annotator => Err(Error::conflict(format!(
                    "{username:?} exists as an annotator"
                ))),
            };
        }
        let digest = self.new_digest(password)?;
        let now = self.clock.now();
        self.store.write(|t| {
            if let Some(existing) = t.user_by_name(&username) {
                // lost a race with a concurrent bootstrap
                return match existing.role {
                    Role::Admin => Ok(existing.clone()),
                    Role::Annotator => Err(Error::conflict("username exists as an annotator")),
                };
            }
            let user = User {
                id: UserId(t.next_id()),
                username: username.clone(),
                credential_digest: digest,
                role: Role::Admin,
                created_at: now,
            };
            t.insert_user(user.clone())?;
            Ok(user)
        })
    }

    pub fn login(&self, username: &str, password: &str) -> Result<LoginToken> {
        let username = crate::text::normalize_text(username.trim());
        let user = self.store.read().user_by_name(&username).cloned();
        let Some(user) = user else {
            // same work as a real check so timing does not reveal usernames
            verify_password(password, self.dummy_digest());
            return Err(Error::bad_credentials());
        };
        if !verify_password(password, &user.credential_digest) {
            return Err(Error::bad_credentials());
        }
        let now = self.clock.now();
        let expires_at = now + self.settings.session_ttl;
        let token_id = self.random_hex(16);
        let token = self.tokens.encode(&Claims {
            token_id: token_id.clone(),
            user_id: user.id,
            role: user.role,
            exp: expires_at.timestamp(),
        })?;
        self.sessions.insert(token_id, SessionEntry { user_id: user.id, expires_at }, now);
        Ok(LoginToken { token, expires_at })
    }

    pub fn verify(&self, token: &str) -> Result<Principal> {
        let claims = self.tokens.decode(token)?;
        let entry = self
            .sessions
            .lookup(&claims.token_id, self.clock.now())
            .ok_or_else(Error::unauthenticated)?;
        if entry.user_id != claims.user_id {
            return Err(Error::unauthenticated());
        }
        let tables = self.store.read();
        let user = tables.user(entry.user_id).ok_or_else(Error::unauthenticated)?;
        Ok(Principal { user_id: user.id, role: user.role })
    }

    pub fn logout(&self, token: &str) -> Result<()> {
        self.verify(token)?;
        let claims = self.tokens.decode(token)?;
        if self.sessions.remove(&claims.token_id) {
            Ok(())
        } else {
            Err(Error::unauthenticated())
        }
    }

    /// Admins pass every check; annotators need membership or an assignment.
    pub fn authorize(&self, principal: &Principal, requirement: Requirement) -> Result<()> {
        if principal.is_admin() {
            return Ok(());
        }
        let tables = self.store.read();
        let allowed = match requirement {
            Requirement::Admin => false,
            Requirement::MemberOf(project) => tables.is_member(principal.user_id, project),
            Requirement::AssigneeOf(dp) => tables.assignment_for(dp, principal.user_id).is_some(),
        };
        if allowed {
            Ok(())
        } else {
            Err(Error::forbidden())
        }
    }

    /// Number of live (unexpired, unrevoked) sessions, including ones not yet swept.
    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }
}

impl App {
    fn dummy_digest(&self) -> &str {
        self.dummy_digest.get_or_init(|| {
            hash_password("not-a-real-password", &[7u8; 16], self.settings.password)
                .expect("dummy digest")
        })
    }
}
