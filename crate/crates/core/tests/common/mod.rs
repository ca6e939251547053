#![allow(dead_code)]

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes256;
use sha2::{Digest, Sha256};

use sigcorrect::packing::{pack_public_key, pack_secret_key, pack_signature};
use sigcorrect::scheme::{keygen, sign, SignMode, DEFAULT_KAPPA_CAP};
use sigcorrect::ParameterSet;

/// AES-256 CTR_DRBG as used by the NIST known-answer generators.
pub struct NistDrbg {
    key: [u8; 32],
    v: [u8; 16],
}

impl NistDrbg {
    pub fn new(entropy: &[u8; 48]) -> Self {
        let mut d = Self {
            key: [0; 32],
            v: [0; 16],
        };
        d.update(Some(entropy));
        d
    }

    fn increment_v(&mut self) {
        for b in self.v.iter_mut().rev() {
            if *b == 0xff {
                *b = 0;
            } else {
                *b += 1;
                break;
            }
        }
    }

    fn block(&self) -> [u8; 16] {
        let cipher = Aes256::new(&self.key.into());
        let mut b = self.v.into();
        cipher.encrypt_block(&mut b);
        b.into()
    }

    fn update(&mut self, provided: Option<&[u8; 48]>) {
        let mut temp = [0u8; 48];
        for i in 0..3 {
            self.increment_v();
            temp[16 * i..16 * (i + 1)].copy_from_slice(&self.block());
        }
        if let Some(p) = provided {
            for (t, x) in temp.iter_mut().zip(p) {
                *t ^= x;
            }
        }
        self.key.copy_from_slice(&temp[..32]);
        self.v.copy_from_slice(&temp[32..]);
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(16) {
            self.increment_v();
            let b = self.block();
            chunk.copy_from_slice(&b[..chunk.len()]);
        }
        self.update(None);
    }
}

fn hex_line(out: &mut String, label: &str, bytes: &[u8]) {
    out.push_str(label);
    if bytes.is_empty() {
        out.push_str("00");
    }
    out.push_str(&hex::encode_upper(bytes));
    out.push('\n');
}

/// Single-count response file in the layout used by the PQClean test
/// harness, plus the raw pk/sk/signature for further checks.
pub struct KatRun {
    pub rsp: String,
    pub pk: Vec<u8>,
    pub sk: Vec<u8>,
    pub sig: Vec<u8>,
    pub msg: Vec<u8>,
}

pub fn kat_response(params: &ParameterSet) -> KatRun {
    let mut entropy = [0u8; 48];
    for (i, e) in entropy.iter_mut().enumerate() {
        *e = i as u8;
    }
    let mut drbg = NistDrbg::new(&entropy);
    let mut seed = [0u8; 48];
    drbg.fill(&mut seed);
    let mut msg = vec![0u8; 33];
    drbg.fill(&mut msg);

    let mut drbg = NistDrbg::new(&seed);
    let mut key_seed = [0u8; 32];
    drbg.fill(&mut key_seed);
    let (pk, sk) = keygen(&key_seed, params);
    let sig = sign(&sk, &msg, SignMode::Deterministic, DEFAULT_KAPPA_CAP)
        .signature()
        .expect("clean key signs");
    let pk = pack_public_key(&pk);
    let sk = pack_secret_key(&sk).unwrap();
    let sig = pack_signature(&sig).unwrap();

    let mut rsp = String::new();
    rsp.push_str("count = 0\n");
    hex_line(&mut rsp, "seed = ", &seed);
    rsp.push_str(&format!("mlen = {}\n", msg.len()));
    hex_line(&mut rsp, "msg = ", &msg);
    hex_line(&mut rsp, "pk = ", &pk);
    hex_line(&mut rsp, "sk = ", &sk);
    let mut sm = sig.clone();
    sm.extend_from_slice(&msg);
    rsp.push_str(&format!("smlen = {}\n", sm.len()));
    hex_line(&mut rsp, "sm = ", &sm);
    KatRun {
        rsp,
        pk,
        sk,
        sig,
        msg,
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Published SHA-256 digests of the single-count response files for the
/// 3.1 reference implementation.
pub const KAT_SHA256_V31: [(u8, &str); 3] = [
    (2, "faa8998108fa541309c9df5044018c5d26cc23654594bef639dd64b838646cbd"),
    (3, "8439f580566c46b99449b2cbbd597ce59bcd5d184b90c1108b79a08f6bdbbcb1"),
    (5, "984ea5f06b13778292f60ecc07301af76e375f1bb9f4a39d676513439e1e83a2"),
];
