# In-process worker pool for batched backend requests and per-pair SVM training
