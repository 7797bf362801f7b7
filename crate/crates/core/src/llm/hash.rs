use sha2::{Digest, Sha256};

use super::ChatRequest;

/// Canonical byte form of a request: compact JSON with keys in a fixed order
/// and the temperature printed with exactly one decimal.
pub fn canonical_request_bytes(req: &ChatRequest) -> Vec<u8> {
    let s = |v: &str| serde_json::to_string(v).expect("strings serialize");
    format!(
        "{{\"model_id\":{},\"system\":{},\"user\":{},\"temperature\":{:.1},\"max_tokens\":{}}}",
        s(&req.model_id),
        s(&req.system),
        s(&req.user),
        req.temperature,
        req.max_tokens
    )
    .into_bytes()
}

/// Hex SHA-256 of [`canonical_request_bytes`]; the cassette key.
pub fn canonical_request_hash(req: &ChatRequest) -> String {
    hex::encode(Sha256::digest(canonical_request_bytes(req)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ChatRequest {
        ChatRequest {
            model_id: "gpt-3.5-turbo-instruct".into(),
            system: "You are a helpful assistant.".into(),
            user: "Write a Python function to return the total number of rows in SQLite.\n\"quoted\" é"
                .into(),
            temperature: 0.0,
            max_tokens: 512,
        }
    }

    #[test]
    fn equal_requests_hash_equally() {
        assert_eq!(
            canonical_request_hash(&fixture()),
            canonical_request_hash(&fixture().clone())
        );
    }

    #[test]
    fn temperature_changes_the_hash() {
        let mut warm = fixture();
        warm.temperature = 0.1;
        assert_ne!(
            canonical_request_hash(&fixture()),
            canonical_request_hash(&warm)
        );
    }

    #[test]
    fn golden_digests() {
        // computed with Python's json + hashlib over the same canonical form
        assert_eq!(
            canonical_request_hash(&fixture()),
            "759bd595e6b97d53aa840af8546a975c3e3642439a1f354ec1c80606de42c07c"
        );
        let small = ChatRequest {
            model_id: "m".into(),
            system: String::new(),
            user: "hi".into(),
            temperature: 0.1,
            max_tokens: 16,
        };
        // printf '%s' '<canonical>' | sha256sum
        assert_eq!(
            canonical_request_hash(&small),
            "fa765eb3bb80a3ae800bdd7f1c4010a34ffa044f258b9fe9a20e78ad794e1232"
        );
    }

    #[test]
    fn canonical_form_is_stable() {
        let bytes = canonical_request_bytes(&fixture());
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("{\"model_id\":\"gpt-3.5-turbo-instruct\",\"system\""));
        assert!(text.ends_with("\"temperature\":0.0,\"max_tokens\":512}"));
    }
}
