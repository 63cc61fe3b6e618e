use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pqchain_core::cert::{
    build_csr, verify_certificate, CertSigningRequest, KeyMaterial, LegacyCertificate, PqCertificate, SubjectInfo,
    ECDSA_SECP256K1_OID, FALCON512_OID,
};
use pqchain_core::did::{Did, Registry};
use pqchain_core::entropy::{
    deliver_shares, establish_entropy_session, request_entropy, xor_combine, xor_split, EntropyService, EntropySource,
    Recomposer,
};
use pqchain_core::metatx::{sign_outer, RelaySigner, RelaySignerConfig, WrapperParams, WRAPPER_GAS_LIMIT};
use pqchain_core::sim::{metrics_csv, relay_hub_address, spawn_network, Metrics, SimConfig, Simulation};
use pqchain_core::tunnel::{handshake, TunnelConfig};
use pqchain_core::tx::{sign_inner, SignedTransaction, Transaction};
use pqchain_core::verify::{append_decision, bench_csv, decision_json, verify_with, Backend, BenchRow, GasModel, Verifier};
use pqchain_core::wire::{Link, WireLog};
use pqchain_crypto::ecdsa::{Address, EcdsaKeyPair};
use pqchain_crypto::{falcon, kat, FalconPublicKey};
use ruint::aliases::U256;
use serde_json::{json, Value};

use crate::files::*;
use crate::*;

pub fn run(cli: Cli) -> Result<()> {
    let pretty = cli.pretty;
    match cli.command {
        Command::Entropy(c) => entropy(c, pretty),
        Command::Cert(c) => cert(c, pretty),
        Command::Registry(c) => registry(c, pretty),
        Command::Tunnel(c) => tunnel(c, pretty),
        Command::Tx(c) => tx(c, pretty),
        Command::Sim(c) => sim(c, pretty),
        Command::Bench(c) => bench(c, pretty),
    }
}

fn now(clock: &Clock) -> u64 {
    clock
        .now
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

fn hub(arg: &Option<String>) -> Result<Address> {
    match arg {
        Some(s) => s.parse().map_err(|_| Failure::usage("--hub: expected a 20-byte hex address")),
        None => Ok(relay_hub_address()),
    }
}

fn backend(s: &str) -> Result<Backend> {
    s.parse().map_err(Failure::usage)
}

fn entropy(cmd: EntropyCmd, pretty: bool) -> Result<()> {
    match cmd {
        EntropyCmd::Generate { bytes, source_id, seed } => {
            let mut src = match seed.seed {
                Some(s) => EntropySource::seeded(source_id, &s.to_be_bytes()),
                None => EntropySource::live(source_id, false),
            };
            let block = src.generate(bytes)?;
            emit(
                &json!({
                    "source_id": block.source_id,
                    "certified": block.certified,
                    "sequence": block.sequence,
                    "bytes": hex::encode(&block.bytes),
                }),
                pretty,
            );
        }
        EntropyCmd::Session {
            kem,
            shares,
            bytes,
            requests,
            node,
            seed,
            clock,
        } => {
            let t = now(&clock);
            let source = match seed.seed {
                Some(s) => EntropySource::seeded("qrng-0", &s.to_be_bytes()),
                None => EntropySource::live("qrng-0", false),
            };
            let mut service = EntropyService::new(source).with_shares(shares);
            let mut log = WireLog::new();
            let mut link = Link::new(&mut log);
            let issued = service.issue_bootstrap(&node, t)?;
            let delivered = deliver_shares(&mut link, &issued)?;
            let mut node_rng = rng(seed.seed, "pqchain/cli/entropy-node")?;
            let mut session = establish_entropy_session(
                &node,
                &delivered,
                &mut Recomposer::new(),
                &mut service,
                &mut link,
                kem.into(),
                &mut node_rng,
                t,
            )?;
            let blocks = (0..requests)
                .map(|_| request_entropy(&mut session, &mut service, &mut link, bytes).map(hex::encode))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            drop(link);
            emit(
                &json!({
                    "node": node,
                    "kem": pqchain_crypto::KemAlgorithm::from(kem).name(),
                    "session_id": hex::encode(session.session_id),
                    "shares": shares,
                    "bootstrap_key_discarded": session.bootstrap_key_discarded(),
                    "entropy": blocks,
                    "wire_frames": log.len(),
                    "wire_bytes": log.total_bytes(),
                }),
                pretty,
            );
        }
        EntropyCmd::Split { key, shares, seed } => {
            let key = parse_hex("--key", &key)?;
            let parts = xor_split(&key, shares, &mut rng(seed.seed, "pqchain/cli/split")?)?;
            emit(&json!({ "shares": parts.iter().map(hex::encode).collect::<Vec<_>>() }), pretty);
        }
        EntropyCmd::Combine { shares } => {
            let parts = shares.iter().map(|s| parse_hex("share", s)).collect::<Result<Vec<_>>>()?;
            if parts.iter().any(|p| p.len() != parts[0].len()) {
                return Err(Failure::domain("Malformed", "shares differ in length"));
            }
            emit(&json!({ "key": hex::encode(xor_combine(parts.iter().map(Vec::as_slice))) }), pretty);
        }
    }
    Ok(())
}

fn subject(args: &SubjectArgs, did: &Did) -> Result<SubjectInfo> {
    Ok(SubjectInfo::new(&args.cn, &args.org, &args.country, did.clone())?)
}

fn cert_json(c: &PqCertificate) -> Value {
    json!({
        "serial": hex::encode(c.serial),
        "subject": {
            "common_name": c.subject.common_name,
            "organization": c.subject.organization,
            "country": c.subject.country,
            "did": c.subject.did.as_str(),
        },
        "eth_public_key": hex::encode(c.eth_public_key.as_bytes()),
        "falcon_public_key_bytes": c.falcon_public_key.as_bytes().len(),
        "falcon_algorithm_oid": c.falcon_algorithm_oid,
        "not_before": c.not_before,
        "not_after": c.not_after,
        "issuer_did": c.issuer_did.as_str(),
        "ca_signature_bytes": c.ca_falcon_signature.len(),
    })
}

fn cert(cmd: CertCmd, pretty: bool) -> Result<()> {
    match cmd {
        CertCmd::InitCa {
            out,
            registry,
            root_name,
            seed,
        } => {
            let mut r = rng(seed.seed, "pqchain/cli/ca")?;
            let eth = EcdsaKeyPair::generate(&mut r);
            let fal = falcon::keygen(&mut r)?;
            let root = EcdsaKeyPair::generate(&mut r);
            let did = Did::for_key(eth.public());
            save_json(
                &out,
                &CaFile {
                    did: did.to_string(),
                    eth_secret: hex::encode(eth.secret_bytes()),
                    falcon_public: hex::encode(fal.public.as_bytes()),
                    falcon_secret: hex::encode(fal.secret.as_bytes()),
                    root_name,
                    root_secret: hex::encode(root.secret_bytes()),
                },
            )?;
            write_atomic(&registry, Registry::new(did.clone()).snapshot().as_bytes())?;
            emit(&json!({ "ca_did": did.as_str() }), pretty);
        }
        CertCmd::Keygen { out, seed } => {
            let mut r = rng(seed.seed, "pqchain/cli/keygen")?;
            let ecdsa = EcdsaKeyPair::generate(&mut r);
            let id = Identity {
                did: Did::for_key(ecdsa.public()),
                ecdsa,
                falcon: falcon::keygen(&mut r)?,
                account: EcdsaKeyPair::generate(&mut r),
            };
            save_json(&out, &id.to_file())?;
            emit(
                &json!({ "did": id.did.as_str(), "account": id.account.address().to_string() }),
                pretty,
            );
        }
        CertCmd::Legacy {
            ca,
            key,
            subject: s,
            validity,
            out,
            clock,
        } => {
            let ca = Ca::load(&ca)?;
            let id = Identity::load(&key)?;
            let t = now(&clock);
            let legacy = LegacyCertificate::issue(
                subject(&s, &id.did)?,
                &ca.root_name,
                &ca.root,
                t,
                t.saturating_add(validity),
                *id.ecdsa.public(),
            );
            write_atomic(&out, legacy.to_armor().as_bytes())?;
            emit(&json!({ "did": id.did.as_str(), "issuer": ca.root_name }), pretty);
        }
        CertCmd::Csr {
            key,
            alg,
            subject: s,
            out,
            seed,
        } => {
            let id = Identity::load(&key)?;
            let subj = subject(&s, &id.did)?;
            let mut r = rng(seed.seed, "pqchain/cli/csr")?;
            let csr = match alg {
                CsrAlg::Ecdsa => build_csr(subj, KeyMaterial::Ecdsa(&id.ecdsa), ECDSA_SECP256K1_OID, &mut r)?,
                CsrAlg::Falcon => build_csr(subj, KeyMaterial::Falcon(&id.falcon), FALCON512_OID, &mut r)?,
            };
            write_atomic(&out, csr.to_armor().as_bytes())?;
            emit(&json!({ "did": id.did.as_str(), "algorithm_oid": csr.algorithm_oid }), pretty);
        }
        CertCmd::Issue {
            ca,
            registry,
            legacy,
            csr_eth,
            csr_falcon,
            out,
            seed,
            clock,
        } => {
            let mut ca = Ca::load(&ca)?;
            let mut reg = ca.load_registry(&registry)?;
            let legacy = LegacyCertificate::from_armor(&read_text(&legacy)?)?;
            let csr_eth = CertSigningRequest::from_armor(&read_text(&csr_eth)?)?;
            let csr_falcon = CertSigningRequest::from_armor(&read_text(&csr_falcon)?)?;
            let mut r = rng(seed.seed, "pqchain/cli/issue")?;
            let issued = ca
                .authority
                .issue_certificate(&mut reg, &legacy, &csr_eth, &csr_falcon, now(&clock), &mut r)?;
            write_atomic(&out, issued.certificate.to_armor().as_bytes())?;
            write_atomic(&registry, reg.snapshot().as_bytes())?;
            emit(
                &json!({
                    "did": issued.certificate.did().as_str(),
                    "serial": hex::encode(issued.certificate.serial),
                    "salt": hex::encode(issued.salt),
                    "registry_hash": reg.state_hash().to_string(),
                }),
                pretty,
            );
        }
        CertCmd::Verify { ca, cert, clock } => {
            let ca = Ca::load(&ca)?;
            let c = PqCertificate::from_armor(&read_text(&cert)?)?;
            if c.issuer_did != *ca.authority.did() {
                return Err(Failure::domain("CertificateRejected", "issuer is not this CA"));
            }
            verify_certificate(&c, ca.authority.falcon_public(), now(&clock))
                .map_err(|e| Failure::domain("CertificateRejected", e))?;
            emit(&json!({ "did": c.did().as_str(), "valid": true }), pretty);
        }
        CertCmd::Show { cert } => {
            let c = PqCertificate::from_armor(&read_text(&cert)?)?;
            emit(&cert_json(&c), pretty);
        }
    }
    Ok(())
}

fn registry(cmd: RegistryCmd, pretty: bool) -> Result<()> {
    match cmd {
        RegistryCmd::Resolve { ca, registry, did } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            let r = reg.resolve_str(&did)?;
            emit(
                &json!({
                    "did": r.did.as_str(),
                    "controller": r.controller.as_str(),
                    "eth_public_key": hex::encode(r.eth_public_key.as_bytes()),
                    "falcon_public_key": hex::encode(r.falcon_public_key.as_bytes()),
                    "subject_proof": r.subject_proof.to_string(),
                    "registered_at": r.registered_at,
                }),
                pretty,
            );
        }
        RegistryCmd::Controls { ca, registry, key, did } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            let id = Identity::load(&key)?;
            let did = match did {
                Some(d) => Did::parse(&d)?,
                None => id.did.clone(),
            };
            let c = reg.controls(id.ecdsa.public(), &did);
            emit(&json!({ "did": did.as_str(), "control": format!("{c:?}") }), pretty);
            if !c.is_granted() {
                return Err(Failure::domain("Unauthorized", format!("{c:?}")));
            }
        }
        RegistryCmd::Hash { ca, registry } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            emit(&json!({ "records": reg.len(), "state_hash": reg.state_hash().to_string() }), pretty);
        }
    }
    Ok(())
}

fn tunnel(cmd: TunnelCmd, pretty: bool) -> Result<()> {
    let TunnelCmd::Handshake {
        ca,
        a_key,
        a_cert,
        b_key,
        b_cert,
        kem,
        messages,
        seed,
        clock,
    } = cmd;
    let ca = Ca::load(&ca)?;
    let side = |key: &Path, cert: &Path| -> Result<TunnelConfig> {
        let id = Identity::load(key)?;
        let c = PqCertificate::from_armor(&read_text(cert)?)?;
        Ok(TunnelConfig::new(
            c,
            id.falcon,
            ca.authority.did().clone(),
            ca.authority.falcon_public().clone(),
            [],
        ))
    };
    let mut a = side(&a_key, &a_cert)?;
    let mut b = side(&b_key, &b_cert)?;
    a.kem = kem.into();
    b.kem = kem.into();
    a.allow_list.insert(b.did().clone());
    b.allow_list.insert(a.did().clone());
    let t = now(&clock);
    let mut log = WireLog::new();
    let mut link = Link::new(&mut log);
    let (mut sa, mut sb) = handshake(
        &a,
        &b,
        &mut link,
        &mut rng(seed.seed, "pqchain/cli/tunnel-a")?,
        &mut rng(seed.seed, "pqchain/cli/tunnel-b")?,
        t,
    )?;
    drop(link);
    let handshake_bytes = log.total_bytes();
    let mut record_bytes = 0;
    for i in 0..messages {
        let msg = format!("message {i}");
        let rec = sa.seal(msg.as_bytes())?;
        let wire = rec.encode();
        record_bytes += wire.len();
        if sb.open_bytes(&wire)? != msg.as_bytes() {
            return Err(Failure::domain("TagInvalid", "payload mismatch"));
        }
    }
    emit(
        &json!({
            "initiator": a.did().as_str(),
            "responder": b.did().as_str(),
            "kem": a.kem.name(),
            "paired": sa.pairs_with(&sb),
            "handshake_bytes": handshake_bytes,
            "messages": messages,
            "record_bytes": record_bytes,
        }),
        pretty,
    );
    Ok(())
}

fn tx(cmd: TxCmd, pretty: bool) -> Result<()> {
    match cmd {
        TxCmd::Sign {
            key,
            ca,
            registry,
            to,
            value,
            data,
            nonce,
            gas,
            chain,
            seed,
        } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            let id = Identity::load(&key)?;
            let to = to
                .map(|s| s.parse::<Address>())
                .transpose()
                .map_err(|_| Failure::usage("--to: expected a 20-byte hex address"))?;
            let inner = sign_inner(
                Transaction {
                    nonce,
                    gas_price: U256::ZERO,
                    gas_limit: gas,
                    to,
                    value: U256::from(value),
                    data: parse_hex("--data", &data)?,
                    chain_id: chain.chain_id,
                },
                &id.account,
            );
            let params = WrapperParams {
                nonce,
                gas_price: U256::ZERO,
                gas_limit: WRAPPER_GAS_LIMIT,
                chain_id: chain.chain_id,
            };
            let mut r = rng(seed.seed, "pqchain/cli/tx")?;
            let meta = sign_outer(inner, &id.did, &id.falcon, &id.ecdsa, hub(&chain.hub)?, &params, &reg, &mut r)?;
            emit(
                &json!({
                    "id": meta.hash().to_string(),
                    "inner_hash": meta.inner.hash().to_string(),
                    "writer_did": id.did.as_str(),
                    "raw": hex::encode(meta.raw()),
                }),
                pretty,
            );
        }
        TxCmd::Verify {
            ca,
            registry,
            raw,
            backend: b,
            hub: h,
            log,
        } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            let wrapper = SignedTransaction::decode_raw(&parse_hex("--raw", &raw)?)
                .map_err(|e| Failure::domain("Malformed", e))?;
            let verifier = Verifier::new(hub(&h)?, backend(&b)?);
            let (d, t) = verifier.verify_timed(&wrapper, &reg);
            if let Some(path) = log {
                append_decision(&resolve(&path), &wrapper.hash(), &d, &t)
                    .map_err(|e| Failure::domain("IoError", e))?;
            }
            emit(&decision_json(&wrapper.hash(), &d, &t), pretty);
            if let Some(r) = d.reason.filter(|_| !d.is_admit()) {
                return Err(Failure::domain(r.as_str(), "transaction rejected"));
            }
        }
        TxCmd::Relay {
            key,
            ca,
            registry,
            socket,
            max_connections,
            chain,
            seed,
        } => {
            let reg = Ca::load(&ca)?.load_registry(&registry)?;
            let id = Identity::load(&key)?;
            let signer = RelaySigner::new(
                RelaySignerConfig {
                    writer_did: id.did,
                    writer_eth: id.ecdsa,
                    falcon: id.falcon,
                    account: id.account,
                    relay_hub: hub(&chain.hub)?,
                    chain_id: chain.chain_id,
                    registry: reg,
                },
                Box::new(rng(seed.seed, "pqchain/cli/relay")?),
            );
            signer
                .serve_unix(&resolve(&socket), max_connections)
                .map_err(|e| Failure::domain("IoError", e))?;
        }
    }
    Ok(())
}

fn sim_config(args: &SimArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(p) => SimConfig::parse(&read_text(p)?)?,
        None => SimConfig::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set {o:?}: expected KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    for a in &args.adversaries {
        cfg.adversaries.insert(a.parse()?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_sim_outputs(dir: &Path, metrics: &[Metrics], sim: &Simulation) -> Result<()> {
    let jsonl: String = metrics.iter().map(|m| m.to_json_line() + "\n").collect();
    write_atomic(&dir.join("metrics.jsonl"), jsonl.as_bytes())?;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(metrics).as_bytes())?;
    write_atomic(&dir.join("chain.bin"), &sim.chain_snapshot(0))?;
    if sim.config().record_logs {
        let lines: String = sim.nodes().iter().flat_map(|n| n.decisions.iter()).map(|l| format!("{l}\n")).collect();
        write_atomic(&dir.join("decisions.jsonl"), lines.as_bytes())?;
    }
    Ok(())
}

fn sim(cmd: SimCmd, pretty: bool) -> Result<()> {
    match cmd {
        SimCmd::Run { seed, args } => {
            let mut cfg = sim_config(&args)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut s = spawn_network(&cfg)?;
            let m = s.run().clone();
            if let Some(dir) = args.out.as_ref().or(cfg.output_dir.as_ref()) {
                write_sim_outputs(dir, std::slice::from_ref(&m), &s)?;
            }
            emit(&serde_json::to_value(&m).expect("metrics"), pretty);
        }
        SimCmd::Sweep { from, count, args } => {
            let mut cfg = sim_config(&args)?;
            cfg.seed = from;
            let base = spawn_network(&cfg)?;
            let mut all = Vec::new();
            let mut last = None;
            for seed in from..from + count {
                let mut s = base.fork(seed);
                let m = s.run().clone();
                emit(&serde_json::to_value(&m).expect("metrics"), pretty);
                all.push(m);
                last = Some(s);
            }
            if let (Some(dir), Some(s)) = (args.out.as_ref().or(cfg.output_dir.as_ref()), last) {
                write_sim_outputs(dir, &all, &s)?;
            }
        }
    }
    Ok(())
}

fn bench(cmd: BenchCmd, pretty: bool) -> Result<()> {
    let BenchCmd::Verify {
        backend: b,
        kat: path,
        out,
        limit,
    } = cmd;
    let backend = backend(&b)?;
    let vectors = kat::parse_sign_kat(&read_text(&path)?)?;
    if vectors.is_empty() {
        return Err(Failure::domain("Malformed", "no KAT vectors found"));
    }
    let model = GasModel::default();
    let mut rows = Vec::new();
    for v in vectors.iter().take(limit.unwrap_or(usize::MAX)) {
        let (msg, sig) = v.detached()?;
        let pk = FalconPublicKey::from_slice(&v.pk)?;
        let (accepted, gas) = verify_with(backend, &msg, &sig, &pk, &model);
        rows.push(BenchRow {
            vector: v.count as usize,
            message_len: msg.len(),
            accepted,
            gas,
        });
    }
    let csv = bench_csv(&rows);
    match out {
        Some(p) => {
            write_atomic(&p, csv.as_bytes())?;
            let gas: Vec<u64> = rows.iter().map(|r| r.gas).collect();
            emit(
                &json!({
                    "vectors": rows.len(),
                    "accepted": rows.iter().filter(|r| r.accepted).count(),
                    "gas_min": gas.iter().min(),
                    "gas_max": gas.iter().max(),
                    "block_gas_limit": model.block_gas_limit(),
                }),
                pretty,
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}
