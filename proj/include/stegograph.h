/* C interface to the stegograph library: synthetic-cover generation,
 * embedding simulation, model training/evaluation and graph inspection.
 * All functions return SG_OK or an error code; sg_last_error() describes the
 * most recent failure on the calling thread. Paths are UTF-8, NUL-terminated. */
#ifndef STEGOGRAPH_H
#define STEGOGRAPH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sg_status {
    SG_OK = 0,
    SG_ERR_INVALID_ARGUMENT = 1,
    SG_ERR_IO = 2,
    SG_ERR_NUMERIC = 3,
    SG_ERR_INTERNAL = 4
} sg_status;

/* Message for the last failure on this thread; empty string if none. */
const char* sg_last_error(void);

/* Writes `count` synthetic grayscale covers (binary PGM) into out_dir. */
sg_status sg_make_covers(const char* out_dir, int count, int height, int width, unsigned long long seed);

/* Builds a labeled cover/stego corpus from a directory of PGM covers.
 * algorithm is "uniform" or "hill"; payload in bits per pixel.
 * split_spec is "train/val/test" weights like "40/10/50" (NULL for default).
 * On success the manifest path is copied into manifest_path_out (if given). */
sg_status sg_make_dataset(const char* covers_dir, const char* out_dir, double payload_bpp, const char* algorithm,
                          unsigned long long seed, const char* split_spec, char* manifest_path_out,
                          size_t manifest_path_cap);

/* Trains per a key-value config file; writes best.ckpt, report.txt and
 * timing.txt into out_dir. */
sg_status sg_train(const char* config_path, const char* out_dir);

/* Accuracy of a checkpoint over one split ("train", "val" or "test").
 * manifest_path NULL or empty falls back to the manifest recorded in the
 * checkpoint. */
sg_status sg_evaluate(const char* ckpt_path, const char* manifest_path, const char* split, double* accuracy_out);

/* Re-evaluates each run directory's best.ckpt on its test split and writes
 * compare.csv and compare.txt into out_dir. */
sg_status sg_compare(const char* const* run_dirs, size_t run_count, const char* out_dir);

/* Dumps the (adjacency, node features) pair for one image: text manifest
 * plus a float32 blob. ckpt_path NULL uses seed-initialized parameters. */
sg_status sg_graph_dump(const char* image_path, const char* config_path, const char* ckpt_path,
                        const char* out_path);

/* Loaded model handle for repeated prediction. */
typedef struct sg_model sg_model;

sg_status sg_model_load(const char* ckpt_path, sg_model** model_out);
void sg_model_free(sg_model* model);

/* probabilities_out[0] = cover, probabilities_out[1] = stego. */
sg_status sg_model_predict(sg_model* model, const char* image_path, double probabilities_out[2]);

#ifdef __cplusplus
}
#endif

#endif /* STEGOGRAPH_H */
