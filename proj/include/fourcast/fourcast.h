#ifndef FOURCAST_H
#define FOURCAST_H

/* C interface to the fourcast library. All functions return an fc_status;
 * on failure fc_last_error() describes the problem on the calling thread.
 * Complex coefficients travel as interleaved (re, im) doubles. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FOURCAST_BUILDING)
#    define FC_API __declspec(dllexport)
#  else
#    define FC_API __declspec(dllimport)
#  endif
#else
#  define FC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fc_status {
    FC_OK = 0,
    FC_INVALID_INPUT = 1,
    FC_PROTOCOL_ERROR = 2,
    FC_NOT_FOUND = 3,
    FC_INGEST_ERROR = 4,
    FC_TRAINING_ERROR = 5,
    FC_IO_ERROR = 6,
    FC_BUFFER_TOO_SMALL = 7,
    FC_INTERNAL_ERROR = 8
} fc_status;

typedef struct fc_controller fc_controller;
typedef struct fc_experiment fc_experiment;

FC_API const char* fc_version(void);
FC_API const char* fc_status_name(fc_status status);
/* Message of the last failure on this thread; empty after a success. */
FC_API const char* fc_last_error(void);

/* ---- spectral codec ---- */

/* Half spectrum of n real values (n even): writes n/2+1 bins to `bins`. */
FC_API fc_status fc_dft(const double* values, size_t n, double* bins);

/* Inverse of a k-bin prefix of a length-n half spectrum; missing bins are zero. */
FC_API fc_status fc_reconstruct(const double* bins, size_t k, size_t n, double* values);

/* Shortest prefix holding a fraction `e` of the batch energy. `bins` needs
 * room for n/2+1 bins; `k` receives the number kept. */
FC_API fc_status fc_truncate_energy(const double* values, size_t n, double e, double* bins, size_t* k);

/* Shortest prefix whose reconstruction RMSE is at most `eps`. */
FC_API fc_status fc_truncate_rmse(const double* values, size_t n, double eps, double* bins, size_t* k);

FC_API fc_status fc_truncation_rmse(const double* values, size_t n, const double* bins, size_t k, double* rmse);

/* ---- wire format ---- */

FC_API size_t fc_message_size(size_t k);

FC_API fc_status fc_encode_message(uint32_t node_id, uint32_t batch_index, uint16_t n, const double* bins, uint16_t k,
                                   uint8_t* out, size_t capacity, size_t* written);

/* `bins` must hold `capacity` bins; FC_BUFFER_TOO_SMALL leaves k set to the need. */
FC_API fc_status fc_decode_message(const uint8_t* bytes, size_t length, uint32_t* node_id, uint32_t* batch_index,
                                   uint16_t* n, uint16_t* k, double* bins, size_t capacity);

/* ---- controller ---- */

FC_API fc_status fc_controller_create(fc_controller** out);
FC_API void fc_controller_destroy(fc_controller* controller);
FC_API fc_status fc_controller_ingest(fc_controller* controller, const uint8_t* bytes, size_t length);
FC_API fc_status fc_controller_estimate(const fc_controller* controller, uint32_t node_id, uint64_t step,
                                        double* value);
FC_API fc_status fc_controller_ledger(const fc_controller* controller, uint64_t* floats_sent, uint64_t* floats_raw,
                                      uint64_t* messages);

/* ---- experiments ---- */

FC_API fc_status fc_experiment_create(fc_experiment** out);
FC_API void fc_experiment_destroy(fc_experiment* experiment);
/* Merges "key = value" lines from a file; later settings override earlier ones. */
FC_API fc_status fc_experiment_load_config(fc_experiment* experiment, const char* path);
FC_API fc_status fc_experiment_set(fc_experiment* experiment, const char* key, const char* value);
/* Runs "synth", "truncate", "simulate" or "train-eval". */
FC_API fc_status fc_experiment_run(fc_experiment* experiment, const char* command);
/* One-line summary of the last successful run; valid until the next run. */
FC_API const char* fc_experiment_summary(const fc_experiment* experiment);
FC_API size_t fc_experiment_output_count(const fc_experiment* experiment);
FC_API const char* fc_experiment_output_path(const fc_experiment* experiment, size_t index);

#ifdef __cplusplus
}
#endif

#endif
