mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Post-quantum hardening toolkit for permissioned Ethereum networks.
///
/// Relative paths are resolved against $PQCHAIN_ROOT when it is set.
/// Exit status: 0 success, 1 domain error (stable code on stderr), 2 usage error.
#[derive(Parser)]
#[command(name = "pqchain", version)]
pub struct Cli {
    /// Human-readable JSON instead of one line per document.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Quantum-entropy bootstrap and delivery.
    #[command(subcommand)]
    Entropy(EntropyCmd),
    /// Certificate authority, CSRs and PQ certificates.
    #[command(subcommand)]
    Cert(CertCmd),
    /// DID registry snapshots.
    #[command(subcommand)]
    Registry(RegistryCmd),
    /// Node-to-node PQ tunnels.
    #[command(subcommand)]
    Tunnel(TunnelCmd),
    /// Meta-transactions: signing, verification, relay signer.
    #[command(subcommand)]
    Tx(TxCmd),
    /// Network simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Cost reports.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Kem {
    Mceliece348864,
    #[value(name = "ml-kem-768")]
    MlKem768,
}

impl From<Kem> for pqchain_crypto::KemAlgorithm {
    fn from(k: Kem) -> Self {
        match k {
            Kem::Mceliece348864 => pqchain_crypto::KemAlgorithm::McEliece348864,
            Kem::MlKem768 => pqchain_crypto::KemAlgorithm::MlKem768,
        }
    }
}

#[derive(Args, Clone)]
pub struct Seeded {
    /// Deterministic randomness; omit to draw from the OS.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone)]
pub struct Clock {
    /// Unix time to evaluate validity at; defaults to the system clock.
    #[arg(long)]
    pub now: Option<u64>,
}

#[derive(Args, Clone)]
pub struct SubjectArgs {
    #[arg(long)]
    pub cn: String,
    #[arg(long, default_value = "")]
    pub org: String,
    #[arg(long, default_value = "")]
    pub country: String,
}

#[derive(Subcommand)]
pub enum EntropyCmd {
    /// Draw bytes from the seeded (or live) source.
    Generate {
        #[arg(long, default_value_t = 32)]
        bytes: usize,
        #[arg(long, default_value = "qrng-0")]
        source_id: String,
        #[command(flatten)]
        seed: Seeded,
    },
    /// Bootstrap a node session end to end and request entropy over it.
    Session {
        #[arg(long, value_enum, default_value = "mceliece348864")]
        kem: Kem,
        #[arg(long, default_value_t = 3)]
        shares: usize,
        #[arg(long, default_value_t = 32)]
        bytes: usize,
        #[arg(long, default_value_t = 1)]
        requests: usize,
        #[arg(long, default_value = "node-0")]
        node: String,
        #[command(flatten)]
        seed: Seeded,
        #[command(flatten)]
        clock: Clock,
    },
    /// XOR-split a key into N shares.
    Split {
        #[arg(long)]
        key: String,
        #[arg(long, default_value_t = 3)]
        shares: usize,
        #[command(flatten)]
        seed: Seeded,
    },
    /// XOR-combine shares back into the key.
    Combine {
        #[arg(required = true, num_args = 2..)]
        shares: Vec<String>,
    },
}

#[derive(Subcommand)]
pub enum CertCmd {
    /// Create CA keys (and the stub legacy root) plus an empty registry.
    InitCa {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value = "Legacy Root")]
        root_name: String,
        #[command(flatten)]
        seed: Seeded,
    },
    /// Generate a node identity (ECDSA, Falcon-512 and account keys).
    Keygen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seeded,
    },
    /// Have the stub legacy root vouch for an identity.
    Legacy {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[command(flatten)]
        subject: SubjectArgs,
        #[arg(long, default_value_t = 31_536_000)]
        validity: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        clock: Clock,
    },
    /// Build a self-signed CSR for one of the identity's keys.
    Csr {
        #[arg(long)]
        key: PathBuf,
        #[arg(long, value_enum)]
        alg: CsrAlg,
        #[command(flatten)]
        subject: SubjectArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seeded,
    },
    /// Issue a PQ certificate and register the DID.
    Issue {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        legacy: PathBuf,
        #[arg(long)]
        csr_eth: PathBuf,
        #[arg(long)]
        csr_falcon: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seeded,
        #[command(flatten)]
        clock: Clock,
    },
    /// Check a PQ certificate against the CA's Falcon key.
    Verify {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[command(flatten)]
        clock: Clock,
    },
    /// Print a certificate's fields.
    Show {
        #[arg(long)]
        cert: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CsrAlg {
    Ecdsa,
    Falcon,
}

#[derive(Subcommand)]
pub enum RegistryCmd {
    /// Look up a DID record.
    Resolve {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        did: String,
    },
    /// Check whether an identity's ECDSA key controls a DID.
    Controls {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        did: Option<String>,
    },
    /// State hash and record count.
    Hash {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
    },
}

#[derive(Subcommand)]
pub enum TunnelCmd {
    /// Handshake between two certified identities and exchange messages.
    Handshake {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        a_key: PathBuf,
        #[arg(long)]
        a_cert: PathBuf,
        #[arg(long)]
        b_key: PathBuf,
        #[arg(long)]
        b_cert: PathBuf,
        #[arg(long, value_enum, default_value = "ml-kem-768")]
        kem: Kem,
        #[arg(long, default_value_t = 10)]
        messages: usize,
        #[command(flatten)]
        seed: Seeded,
        #[command(flatten)]
        clock: Clock,
    },
}

#[derive(Args, Clone)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 648_529)]
    pub chain_id: u64,
    /// Relay hub address; defaults to the simulator's hub.
    #[arg(long)]
    pub hub: Option<String>,
}

#[derive(Subcommand)]
pub enum TxCmd {
    /// Build a meta-transaction: account-signed inner tx, Falcon-signed and wrapped.
    Sign {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 0)]
        value: u64,
        #[arg(long, default_value = "")]
        data: String,
        #[arg(long, default_value_t = 0)]
        nonce: u64,
        #[arg(long, default_value_t = 90_000)]
        gas: u64,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        seed: Seeded,
    },
    /// Run the admission pipeline on a raw wrapper.
    Verify {
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        /// Hex of the wrapper transaction.
        #[arg(long)]
        raw: String,
        #[arg(long, default_value = "opcode-flat")]
        backend: String,
        #[arg(long)]
        hub: Option<String>,
        /// Append the decision to this JSONL log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Serve the relay-signer JSON-RPC on a Unix socket.
    Relay {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        ca: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        socket: PathBuf,
        #[arg(long)]
        max_connections: Option<usize>,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        seed: Seeded,
    },
}

#[derive(Args, Clone)]
pub struct SimArgs {
    /// key = value scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Enable an adversary scenario (repeatable).
    #[arg(long = "adversary")]
    pub adversaries: Vec<String>,
    /// Override a config key (repeatable), e.g. `--set validators=7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Directory for metrics.jsonl, metrics.csv and chain.bin.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum SimCmd {
    /// One seeded run.
    Run {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        args: SimArgs,
    },
    /// Many seeds over one spawned network.
    Sweep {
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[command(flatten)]
        args: SimArgs,
    },
}

#[derive(Subcommand)]
pub enum BenchCmd {
    /// Per-vector verification cost over a Falcon-512 KAT file.
    Verify {
        #[arg(long, default_value = "metered")]
        backend: String,
        #[arg(long)]
        kat: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let prefix = format!("{}: ", f.code);
            let message = f.message.strip_prefix(&prefix).unwrap_or(&f.message);
            eprintln!("error: {}: {message}", f.code);
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
