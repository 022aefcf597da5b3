/* C interface to the papersearch core. Every function returns a ps_status;
 * on failure ps_last_error() carries a thread-local diagnostic. Strings
 * returned through char** out-parameters are owned by the caller and must
 * be released with ps_string_free(). */
#ifndef PAPERSEARCH_H
#define PAPERSEARCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
    PS_OK = 0,
    PS_ERR_INVALID_ARGUMENT = 1,
    PS_ERR_INGEST = 2,
    PS_ERR_IO = 3,
    PS_ERR_TRANSPORT = 4,
    PS_ERR_PROTOCOL = 5,
    PS_ERR_DECODE = 6,
    PS_ERR_INTERNAL = 7
} ps_status;

/* Message for the most recent failure on this thread; empty string when
 * the last call succeeded. The pointer stays valid until the next call
 * on the same thread. */
const char* ps_last_error(void);

void ps_string_free(char* s);

typedef struct ps_corpus ps_corpus;
typedef struct ps_index ps_index;
typedef struct ps_server ps_server;

/* ---- corpus ---- */

ps_status ps_corpus_ingest(const char* corpus_file, const char* storage_dir,
                           ps_corpus** out);
ps_status ps_corpus_open(const char* storage_dir, ps_corpus** out);
void ps_corpus_free(ps_corpus* corpus);
size_t ps_corpus_size(const ps_corpus* corpus);
double ps_corpus_avgdl(const ps_corpus* corpus);

/* ---- BM25 index ---- */

ps_status ps_index_build(const ps_corpus* corpus, double k1, double b,
                         ps_index** out);
ps_status ps_index_save(const ps_index* index, const char* path);
ps_status ps_index_load(const char* path, ps_index** out);
void ps_index_free(ps_index* index);
size_t ps_index_doc_count(const ps_index* index);

/* Top-k search; *out_json is a JSON list of {id, score, rank}. */
ps_status ps_index_search(const ps_index* index, const char* query,
                          size_t topk, char** out_json);

/* ---- retrieval service ---- */

/* Starts serving in a background thread. port 0 picks a free port;
 * default_topk/max_topk/max_batch of 0 keep the built-in defaults. */
ps_status ps_server_start(const ps_index* index, const ps_corpus* corpus,
                          const char* host, int port, size_t default_topk,
                          size_t max_topk, size_t max_batch, ps_server** out);
int ps_server_port(const ps_server* server);
/* Blocks until the server stops (SIGINT/SIGTERM or ps_server_free from
 * another thread). */
ps_status ps_server_wait(ps_server* server);
void ps_server_free(ps_server* server);

/* ---- JSON-configured pipelines ----
 * Each takes a JSON config object and returns a JSON report. Field
 * reference lives next to each CLI subcommand; unknown fields are
 * rejected so typos fail loudly. */

/* config: {corpus_dir, llm, n_abstracts, paraphrase_fraction, seed,
 *          out_dataset?}                                               */
ps_status ps_datagen_run(const char* config_json, char** out_report_json);

/* config: {dataset, policy, topk, group_size?, seed?, limits?,
 *          retriever: {corpus_dir, index_path} | {endpoint},
 *          out_traces?}                                                */
ps_status ps_rollout_run(const char* config_json, char** out_report_json);

/* config: {n_docs?, n_questions?, env_seed?, seed?, steps?,
 *          questions_per_step?, epochs_per_step?, learning_rate?,
 *          group_size?, clip_eps?, kl_coeff?, adv_eps?, topk?,
 *          eval_episodes?, checkpoint_out?}                            */
ps_status ps_train_toy(const char* config_json, char** out_report_json);

/* config: {mode, dataset, policy, topk?, seed?, limits?,
 *          retriever?: {corpus_dir, index_path} | {endpoint},
 *          traces_dir?}                                                */
ps_status ps_eval_run(const char* config_json, char** out_report_json);

/* Renders an eval report (as produced by ps_eval_run) as an aligned
 * text table with category and paraphrase splits. */
ps_status ps_report_format(const char* report_json, char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* PAPERSEARCH_H */
