from rest_framework import serializers

from core.conf import bench_setting

from .endpoints import BackendKind, ModelEndpoint, Sampling


class SamplingSerializer(serializers.Serializer):
    temperature = serializers.FloatField(min_value=0.0, required=False)
    top_p = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    max_tokens = serializers.IntegerField(min_value=1, required=False)

    def validate_top_p(self, value):
        if value <= 0:
            raise serializers.ValidationError("top_p must be greater than 0.")
        return value


class ModelEndpointSerializer(serializers.Serializer):
    """One entry of the ``endpoints`` list in a run config."""

    model_id = serializers.CharField()
    backend = serializers.ChoiceField(choices=[BackendKind.HTTP.value, BackendKind.STUB.value], default="http")
    base_url = serializers.CharField(required=False, allow_blank=True, default="")
    api_key_env = serializers.CharField(required=False, allow_null=True, default=None)
    stub_script = serializers.CharField(required=False, allow_null=True, default=None)
    sampling = SamplingSerializer(required=False)
    requests_per_minute = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    max_in_flight = serializers.IntegerField(min_value=1, required=False, allow_null=True)

    def validate(self, attrs):
        if attrs["backend"] == BackendKind.HTTP and not attrs.get("base_url"):
            raise serializers.ValidationError({"base_url": "Required for http endpoints."})
        if attrs["backend"] == BackendKind.STUB and not attrs.get("stub_script"):
            raise serializers.ValidationError({"stub_script": "Required for stub endpoints."})
        return attrs

    def create(self, validated_data):
        sampling = validated_data.get("sampling") or {}
        return ModelEndpoint(
            model_id=validated_data["model_id"],
            base_url=validated_data.get("base_url", "").rstrip("/"),
            api_key_env=validated_data.get("api_key_env"),
            sampling=Sampling(
                temperature=sampling.get("temperature", bench_setting("TEMPERATURE")),
                top_p=sampling.get("top_p", bench_setting("TOP_P")),
                max_tokens=sampling.get("max_tokens", bench_setting("MAX_TOKENS")),
            ),
            backend=BackendKind(validated_data["backend"]),
            stub_script=validated_data.get("stub_script"),
            requests_per_minute=validated_data.get("requests_per_minute"),
            max_in_flight=validated_data.get("max_in_flight"),
        )
