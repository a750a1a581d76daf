#pragma once
// Error types shared across the library. Each named failure mode gets its
// own exception class so callers can catch precisely.

#include <stdexcept>
#include <string>

namespace hiermem {

class Error : public std::runtime_error {
public:
    explicit Error(std::string message)
        : std::runtime_error(message), message_(std::move(message)) {}

    const char* what() const noexcept override { return message_.c_str(); }

    // Prepend context (e.g. "level 2: ") without losing the concrete type.
    void add_context(const std::string& prefix) { message_ = prefix + message_; }

private:
    std::string message_;
};

#define HIERMEM_ERROR(Name)                                        \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(std::string message) : Error(#Name ": " + std::move(message)) {} \
    }

// core
HIERMEM_ERROR(NonSurjectiveGrouping);
HIERMEM_ERROR(NoCompression);
HIERMEM_ERROR(EmptyGroup);
HIERMEM_ERROR(UnknownNode);
HIERMEM_ERROR(InvalidEdge);
HIERMEM_ERROR(DuplicateUnit);

// extract
HIERMEM_ERROR(EmptyDocument);
HIERMEM_ERROR(MissingStructure);
HIERMEM_ERROR(DanglingDependency);
HIERMEM_ERROR(DimensionMismatch);

// coarsen
HIERMEM_ERROR(MissingFeature);
HIERMEM_ERROR(TooFewUnits);
HIERMEM_ERROR(NoEdges);
HIERMEM_ERROR(GeneratorUnavailable);
HIERMEM_ERROR(DegeneratePartition);

// traverse
HIERMEM_ERROR(BeamWidthMismatch);
HIERMEM_ERROR(PolicyStalled);

// measure
HIERMEM_ERROR(UnknownVariable);
HIERMEM_ERROR(InvalidTable);
HIERMEM_ERROR(EmptyContent);
HIERMEM_ERROR(TooLargeToEnumerate);
HIERMEM_ERROR(InvalidEpsilon);
HIERMEM_ERROR(InvalidGroupCount);
HIERMEM_ERROR(InvalidRatio);
HIERMEM_ERROR(CyclicTaskGraph);

// synthworld
HIERMEM_ERROR(DimTooSmall);

// harness
HIERMEM_ERROR(ConfigError);
HIERMEM_ERROR(UnknownAlgorithm);
HIERMEM_ERROR(InvalidHierarchyFile);

#undef HIERMEM_ERROR

}  // namespace hiermem
