use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tokstore::corpus::{RawTokens, SyntheticSpec, TokenDistribution};
use tokstore::pipeline::{Pipeline, PipelineConfig};
use tokstore::{open_archive, ErrorCategory};
use tokstore_client::{Client, ClientError};
use tokstore_wire::{
    CreateSessionRequest, OpenArchiveRequest, PackRequest, StatsRequest, SyntheticRequest,
    UnpackRequest, EXIT_TRANSPORT,
};

async fn start() -> Client {
    let (addr, _handle) = tokstore_server::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    Client::new(format!("http://{addr}"))
}

async fn make_archive(client: &Client, dir: &Path, n: usize) -> PathBuf {
    let p = |name: &str| dir.join(name);
    client
        .synthetic(&SyntheticRequest {
            spec: SyntheticSpec {
                distribution: TokenDistribution::Zipf { s: 1.0 },
                n_images: n,
                vocab: 391,
                dim: 8,
                classes: 4,
                seed: 21,
                ..Default::default()
            },
            tokens_out: p("tokens.bin"),
            codebook_out: p("codebook.bin"),
            labels_out: Some(p("labels.bin")),
        })
        .await
        .unwrap();
    client
        .pack(&PackRequest {
            tokens: p("tokens.bin"),
            codebook: p("codebook.bin"),
            labels: Some(p("labels.bin")),
            out: p("data.stok"),
            options: Default::default(),
        })
        .await
        .unwrap();
    p("data.stok")
}

#[tokio::test(flavor = "multi_thread")]
async fn records_match_unpacked_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let client = start().await;
    assert_eq!(client.health().await.unwrap().status, "ok");
    let archive = make_archive(&client, dir.path(), 30).await;

    let unpacked = dir.path().join("unpacked.bin");
    let resp = client
        .unpack(&UnpackRequest {
            archive: archive.clone(),
            tokens_out: unpacked.clone(),
            labels_out: Some(dir.path().join("labels_out.bin")),
            codebook_out: Some(dir.path().join("codebook_out.bin")),
            ranked: false,
        })
        .await
        .unwrap();
    assert_eq!(resp.records, 30);
    // original ids come back byte for byte
    assert_eq!(
        std::fs::read(&unpacked).unwrap(),
        std::fs::read(dir.path().join("tokens.bin")).unwrap()
    );
    assert_eq!(
        std::fs::read(dir.path().join("labels_out.bin")).unwrap(),
        std::fs::read(dir.path().join("labels.bin")).unwrap()
    );

    let raw = RawTokens::load(&unpacked).unwrap();
    let info = client
        .open_archive(&OpenArchiveRequest { path: archive })
        .await
        .unwrap();
    for i in 0..30 {
        let rec = client.record(&info.id, i, true).await.unwrap();
        assert_eq!(rec.tokens, raw.grids[i as usize].tokens());
    }
    client.close_archive(&info.id).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn session_batches_match_local_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let client = start().await;
    let archive = make_archive(&client, dir.path(), 24).await;
    let config = PipelineConfig {
        batch_size: 6,
        seed: 7,
        ..Default::default()
    };
    let session = client
        .create_session(&CreateSessionRequest {
            archive: archive.clone(),
            config: config.clone(),
        })
        .await
        .unwrap();
    assert_eq!(session.batches_per_epoch, 4);

    let local = Pipeline::new(Arc::new(open_archive(&archive).unwrap()), config).unwrap();
    let expected: Vec<_> = local.collect::<Result<_, _>>().unwrap();
    for want in &expected {
        let got = client.next_batch(&session.id).await.unwrap().unwrap();
        assert_eq!(got.tensor.0, want.tensor_dump());
        assert_eq!(got.labels.unwrap().0, want.labels_dump().unwrap());
        assert_eq!(got.records, want.records);
    }
    assert!(client.next_batch(&session.id).await.unwrap().is_none());

    client.seek(&session.id, 0, 2).await.unwrap();
    let replay = client.next_batch(&session.id).await.unwrap().unwrap();
    assert_eq!(replay.tensor.0, expected[2].tensor_dump());

    let stats = client.session_stats(&session.id).await.unwrap();
    assert_eq!(stats.samples, 30);
    client.close_session(&session.id).await.unwrap();
    let err = client.session_info(&session.id).await.unwrap_err();
    assert_eq!(err.category(), "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn errors_keep_their_category_codes() {
    let dir = tempfile::tempdir().unwrap();
    let client = start().await;
    let bad = dir.path().join("bad.stok");
    std::fs::write(&bad, b"STOK\x09\x00garbage").unwrap();
    let err = client
        .stats(&StatsRequest { archive: bad })
        .await
        .unwrap_err();
    assert!(matches!(err, ClientError::Api { status: 422, .. }), "{err}");
    assert_eq!(err.exit_code(), ErrorCategory::Format.exit_code());

    let offline = Client::new("http://127.0.0.1:1");
    let err = offline.health().await.unwrap_err();
    assert_eq!(err.exit_code(), EXIT_TRANSPORT);
}
