// @huggingface/transformers is an optional dependency (its native onnxruntime
// postinstall needs network access); the hub backend imports it lazily and the
// stub backend never touches it. This shim keeps compilation independent of
// whether the optional install succeeded.
declare module '@huggingface/transformers';
