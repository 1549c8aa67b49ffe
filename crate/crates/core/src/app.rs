use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use chrono::Duration;
use parking_lot::Mutex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::auth::{PasswordParams, SessionStore, TokenCodec};
use crate::blob::{BlobStore, FsBlobStore, MemoryBlobStore};
use crate::clock::{Clock, SystemClock};
use crate::error::Result;
use crate::faults::FaultInjector;
use crate::store::Store;

/// Audio uploads above this size are rejected unless configured otherwise.
pub const DEFAULT_MAX_UPLOAD_BYTES: u64 = 200 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct Settings {
    pub session_ttl: Duration,
    /// HMAC key for bearer tokens. A random key is drawn when `None`,
    /// which invalidates all tokens on restart.
    pub token_secret: Option<Vec<u8>>,
    pub max_upload_bytes: u64,
    pub password: PasswordParams,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            session_ttl: Duration::hours(24),
            token_secret: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            password: PasswordParams::default(),
        }
    }
}

/// The annotation service: every operation of every module hangs off this type.
pub struct App {
    pub(crate) store: Store,
    pub(crate) blobs: Arc<dyn BlobStore>,
    pub(crate) sessions: SessionStore,
    pub(crate) tokens: TokenCodec,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) rng: Mutex<ChaCha20Rng>,
    pub(crate) faults: Arc<FaultInjector>,
    pub(crate) settings: Settings,
    pub(crate) dummy_digest: OnceLock<String>,
}

#[derive(Default)]
pub struct AppBuilder {
    settings: Settings,
    clock: Option<Arc<dyn Clock>>,
    seed: Option<u64>,
    data_dir: Option<PathBuf>,
    blobs: Option<Arc<dyn BlobStore>>,
}

impl AppBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    pub fn clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Some(Arc::new(clock));
        self
    }

    /// Seeds the generator behind api keys, stored names, salts and token
    /// ids. Only for reproducible fixtures; production draws from the OS.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Persist entities to `<dir>/state.json` and audio under `<dir>/audio/`.
    pub fn data_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.data_dir = Some(dir.into());
        self
    }

    pub fn blob_store(mut self, blobs: Arc<dyn BlobStore>) -> Self {
        self.blobs = Some(blobs);
        self
    }

    pub fn build(self) -> Result<App> {
        let faults = Arc::new(FaultInjector::default());
        let (store, fs_blobs) = match &self.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let store = Store::open(dir.join("state.json"), faults.clone())?;
                let blobs: Arc<dyn BlobStore> = Arc::new(FsBlobStore::open(dir.join("audio"))?);
                (store, Some(blobs))
            }
            None => (Store::in_memory(faults.clone()), None),
        };
        let blobs = self
            .blobs
            .or(fs_blobs)
            .unwrap_or_else(|| Arc::new(MemoryBlobStore::default()));
        let mut rng = match self.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        };
        let secret = match &self.settings.token_secret {
            Some(s) => s.clone(),
            None => {
                let mut s = vec![0u8; 32];
                rng.fill_bytes(&mut s);
                s
            }
        };
        Ok(App {
            store,
            blobs,
            sessions: SessionStore::default(),
            tokens: TokenCodec::new(&secret),
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            rng: Mutex::new(rng),
            faults,
            settings: self.settings,
            dummy_digest: OnceLock::new(),
        })
    }
}

impl App {
    pub fn builder() -> AppBuilder {
        AppBuilder::new()
    }

    /// In-memory instance with default settings.
    pub fn in_memory() -> App {
        AppBuilder::new().build().expect("in-memory app builds")
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn faults(&self) -> &FaultInjector {
        &self.faults
    }

    pub fn blobs(&self) -> &dyn BlobStore {
        &*self.blobs
    }

    /// Digest of all persisted state: entity tables plus the set and content
    /// of stored audio blobs. Equal digests mean nothing was mutated.
    pub fn state_digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.store.digest().as_bytes());
        for name in self.blobs.list()? {
            h.update(name.as_bytes());
            h.update([0]);
            if let Some(bytes) = self.blobs.get(&name)? {
                h.update(Sha256::digest(&bytes));
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    pub(crate) fn random_hex(&self, bytes: usize) -> String {
        let mut buf = vec![0u8; bytes];
        self.rng.lock().fill_bytes(&mut buf);
        hex::encode(buf)
    }
}
