#pragma once

#include <stdexcept>
#include <string>

namespace audioshield {

/// Base class for every error the toolkit raises on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define AUDIOSHIELD_ERROR(Name) \
  struct Name : Error {         \
    using Error::Error;         \
  }

// audio_io
AUDIOSHIELD_ERROR(MalformedHeader);
AUDIOSHIELD_ERROR(UnsupportedFormat);
AUDIOSHIELD_ERROR(TruncatedData);
AUDIOSHIELD_ERROR(IoFailure);

// transforms
AUDIOSHIELD_ERROR(InvalidBand);

// codec
AUDIOSHIELD_ERROR(SilentFrame);
AUDIOSHIELD_ERROR(CodecUnavailable);
AUDIOSHIELD_ERROR(CodecFailed);
AUDIOSHIELD_ERROR(BadOutput);

// classifier
AUDIOSHIELD_ERROR(InsufficientData);
AUDIOSHIELD_ERROR(BadMagic);
AUDIOSHIELD_ERROR(VersionMismatch);
AUDIOSHIELD_ERROR(CorruptPayload);
AUDIOSHIELD_ERROR(ProtocolError);
AUDIOSHIELD_ERROR(ChildExited);
AUDIOSHIELD_ERROR(InvalidProbs);

// attack
AUDIOSHIELD_ERROR(UnknownTarget);

// detection
AUDIOSHIELD_ERROR(DegenerateTraining);
AUDIOSHIELD_ERROR(DimensionMismatch);

// learners
AUDIOSHIELD_ERROR(EmptyData);
AUDIOSHIELD_ERROR(SingleClass);

// eval
AUDIOSHIELD_ERROR(EmptySet);
AUDIOSHIELD_ERROR(SilentClip);
AUDIOSHIELD_ERROR(TooFewSamples);

// cli / config (exit code 2)
AUDIOSHIELD_ERROR(ConfigError);

#undef AUDIOSHIELD_ERROR

/// Ensemble-member failure: wraps a transform/codec error with the member id.
struct MemberError : Error {
  MemberError(const std::string& member_id, const std::string& message)
      : Error("ensemble member '" + member_id + "': " + message), member(member_id) {}
  std::string member;
};

}  // namespace audioshield
