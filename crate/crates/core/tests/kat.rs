mod common;

use common::{kat_response, sha256_hex, NistDrbg, KAT_SHA256_V31};
use sigcorrect::packing::{pack_signature, unpack_public_key, unpack_secret_key, unpack_signature};
use sigcorrect::scheme::verify;
use sigcorrect::{ParameterSet, Revision};

#[test]
fn drbg_first_seed() {
    let mut entropy = [0u8; 48];
    for (i, e) in entropy.iter_mut().enumerate() {
        *e = i as u8;
    }
    let mut d = NistDrbg::new(&entropy);
    let mut seed = [0u8; 48];
    d.fill(&mut seed);
    assert_eq!(
        hex::encode_upper(seed),
        "061550234D158C5EC95595FE04EF7A25767F2E24CC2BC479D09D86DC9ABCFDE7056A8C266F9EF97ED08541DBD2E1FFA1"
    );
}

#[test]
fn response_digests_match_reference() {
    for (level, expected) in KAT_SHA256_V31 {
        let p = ParameterSet::for_level(level, Revision::V31).unwrap();
        let run = kat_response(&p);
        assert_eq!(sha256_hex(run.rsp.as_bytes()), expected, "level {level}\n{}", &run.rsp[..200]);
    }
}

#[test]
fn kat_artifacts_reparse_and_verify() {
    for p in ParameterSet::all(Revision::V31) {
        let run = kat_response(&p);
        let pk = unpack_public_key(&p, &run.pk).unwrap();
        unpack_secret_key(&p, &run.sk).unwrap();
        let sig = unpack_signature(&p, &run.sig).unwrap();
        assert_eq!(pack_signature(&sig).unwrap(), run.sig);
        assert!(verify(&pk, &run.msg, &run.sig));
    }
}
