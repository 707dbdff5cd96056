#pragma once

#include <memory>
#include <string>

#include "bgl/types.hpp"

namespace bgl {

struct KeyPair {
    Bytes pub;
    Bytes sec;
};

/// Pluggable signature scheme. Both implementations are deterministic: same
/// seed gives the same keypair and same message gives the same signature,
/// which whole-simulation reproducibility depends on.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;

    virtual const char* name() const = 0;
    virtual KeyPair keygen(std::uint64_t seed) const = 0;
    virtual Bytes sign(const Bytes& secret, ByteSpan message) const = 0;
    virtual bool verify(const Bytes& pub, ByteSpan message, const Bytes& sig) const = 0;
};

/// Ed25519 via libsodium, keyed from a seed digest.
const SignatureScheme& ed25519_scheme();

/// Fast hash-based scheme for large property sweeps. The "public" key equals
/// the secret key, so it offers no security; signatures are
/// sha256(key || message) and verification recomputes them. Tampering with
/// any byte is still detected, which is all the tests need.
const SignatureScheme& test_scheme();

/// Lookup by config name: "real" or "test". Throws std::invalid_argument.
const SignatureScheme& scheme_by_name(const std::string& name);

Transaction make_transaction(const SignatureScheme& scheme, const AccountId& source,
                             const AccountId& dest, Money amount, std::uint64_t seq,
                             const Bytes& secret_key);

bool verify_transaction(const SignatureScheme& scheme, const Transaction& t);

/// Signs every non-init node kind in place.
void sign_node(const SignatureScheme& scheme, Node& n, const Bytes& secret_key);

bool verify_node(const SignatureScheme& scheme, const Node& n);

} // namespace bgl
